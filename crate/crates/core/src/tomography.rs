//! Homodyne simulation and quantum-state reconstruction: quadrature
//! distributions and sampling, vacuum calibration, truncated-kernel filtered
//! back-projection, and iterative maximum-likelihood density matrices.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hhg::CatStateParams;
use crate::numerics;
use crate::quantum::{
    coherent_position_amplitude, harmonic_wavefunction, DensityMatrix, WignerGrid,
};

/// Default truncation of the back-projection kernel.
pub const DEFAULT_KC: f64 = 4.7;

/// State models the homodyne simulator can draw from.
#[derive(Debug, Clone)]
pub enum TomoState {
    Coherent(C64),
    Cat(CatStateParams),
    Density(DensityMatrix),
}

impl TomoState {
    pub fn vacuum() -> Self {
        TomoState::Coherent(C64::new(0.0, 0.0))
    }

    /// Radius of phase-space support used to bound sampling grids.
    fn support_radius(&self) -> f64 {
        let core = match self {
            TomoState::Coherent(a) => std::f64::consts::SQRT_2 * a.norm(),
            TomoState::Cat(cat) => {
                std::f64::consts::SQRT_2 * cat.alpha.norm().max(cat.shifted().norm())
            }
            TomoState::Density(rho) => (2.0 * (rho.n_max as f64 + 1.0)).sqrt(),
        };
        core + 7.0
    }
}

/// Homodyne quadrature samples (φ, x_φ) with their vacuum calibration.
#[derive(Debug, Clone)]
pub struct QuadratureDataset {
    pub samples: Vec<(f64, f64)>,
    /// Calibration factor already applied to the samples.
    pub vacuum_scale: f64,
    /// RNG seed when the dataset was simulated.
    pub seed: Option<u64>,
}

impl QuadratureDataset {
    pub fn new(samples: Vec<(f64, f64)>, vacuum_scale: f64, seed: Option<u64>) -> Result<Self> {
        if !(vacuum_scale > 0.0) {
            return Err(Error::validation("vacuum_scale must be positive"));
        }
        if samples
            .iter()
            .any(|&(phi, x)| !(0.0..PI).contains(&phi) || !x.is_finite())
        {
            return Err(Error::validation(
                "samples must have φ ∈ [0, π) and finite quadrature values",
            ));
        }
        Ok(QuadratureDataset {
            samples,
            vacuum_scale,
            seed,
        })
    }

    pub fn phases(&self) -> Vec<f64> {
        let mut phases: Vec<f64> = self.samples.iter().map(|&(phi, _)| phi).collect();
        phases.sort_by(|a, b| a.partial_cmp(b).unwrap());
        phases.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        phases
    }

    /// CSV with header `phi_rad,x` and a `# vacuum_scale=` metadata line.
    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        use std::io::Write;
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "# vacuum_scale={:.17e}", self.vacuum_scale)?;
        if let Some(seed) = self.seed {
            writeln!(f, "# seed={seed}")?;
        }
        writeln!(f, "phi_rad,x")?;
        for (phi, x) in &self.samples {
            writeln!(f, "{phi:.17e},{x:.17e}")?;
        }
        Ok(())
    }

    pub fn read_csv(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut samples = Vec::new();
        let mut vacuum_scale = 1.0;
        let mut seed = None;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let rest = rest.trim();
                if let Some(v) = rest.strip_prefix("vacuum_scale=") {
                    vacuum_scale = v.trim().parse().map_err(|e| Error::Parse {
                        line: lineno + 1,
                        msg: format!("bad vacuum_scale: {e}"),
                    })?;
                } else if let Some(v) = rest.strip_prefix("seed=") {
                    seed = v.trim().parse().ok();
                }
                continue;
            }
            if line.starts_with("phi") {
                continue;
            }
            let mut parts = line.split(',');
            let (a, b) = match (parts.next(), parts.next()) {
                (Some(a), Some(b)) => (a, b),
                _ => {
                    return Err(Error::Parse {
                        line: lineno + 1,
                        msg: "expected two columns".into(),
                    })
                }
            };
            let phi: f64 = a.trim().parse().map_err(|e| Error::Parse {
                line: lineno + 1,
                msg: format!("bad phase: {e}"),
            })?;
            let x: f64 = b.trim().parse().map_err(|e| Error::Parse {
                line: lineno + 1,
                msg: format!("bad quadrature: {e}"),
            })?;
            samples.push((phi, x));
        }
        QuadratureDataset::new(samples, vacuum_scale, seed)
    }
}

/// Probability density P_φ(x) = ⟨x_φ|ρ̂|x_φ⟩ of the rotated quadrature.
pub fn quadrature_distribution(state: &TomoState, phi: f64, x: f64) -> f64 {
    let rot = C64::from_polar(1.0, -phi);
    match state {
        TomoState::Coherent(alpha) => coherent_position_amplitude(x, alpha * rot).norm_sqr(),
        TomoState::Cat(cat) => {
            let psi = coherent_position_amplitude(x, cat.shifted() * rot)
                - cat.epsilon * coherent_position_amplitude(x, cat.alpha * rot);
            psi.norm_sqr() / cat.norm_sq()
        }
        TomoState::Density(rho) => {
            let n = rho.n_max;
            let psis: Vec<f64> = (0..=n).map(|k| harmonic_wavefunction(k, x)).collect();
            let mut acc = C64::new(0.0, 0.0);
            for a in 0..=n {
                for b in 0..=n {
                    let phase = C64::from_polar(1.0, -phi * (a as f64 - b as f64));
                    acc += rho.rho[(a, b)] * psis[a] * psis[b] * phase;
                }
            }
            acc.re.max(0.0)
        }
    }
}

/// Draw `shots_per_phase` quadrature samples at each phase by inverse-CDF
/// sampling. Deterministic: each phase uses an RNG substream derived from
/// (seed, phase index), so the result is independent of scheduling.
pub fn sample_homodyne(
    state: &TomoState,
    phases: &[f64],
    shots_per_phase: usize,
    seed: u64,
) -> Result<QuadratureDataset> {
    if shots_per_phase == 0 {
        return Err(Error::validation("shots_per_phase must be >= 1"));
    }
    if phases.iter().any(|&p| !(0.0..PI).contains(&p)) {
        return Err(Error::validation("phases must lie in [0, π)"));
    }
    let radius = state.support_radius();
    let n_grid = 4096;
    let per_phase: Vec<Vec<(f64, f64)>> = phases
        .par_iter()
        .enumerate()
        .map(|(k, &phi)| {
            // CDF on a fixed grid spanning the state support
            let dx = 2.0 * radius / (n_grid as f64 - 1.0);
            let xs: Vec<f64> = (0..n_grid).map(|i| -radius + i as f64 * dx).collect();
            let pdf: Vec<f64> = xs
                .iter()
                .map(|&x| quadrature_distribution(state, phi, x))
                .collect();
            let mut cdf = numerics::cumulative_trapezoid(&pdf, dx);
            let total = *cdf.last().unwrap();
            for c in &mut cdf {
                *c /= total;
            }
            let mut rng = ChaCha8Rng::seed_from_u64(numerics::mix_seed(seed, k as u64));
            (0..shots_per_phase)
                .map(|_| {
                    let u: f64 = rng.gen();
                    let idx = cdf.partition_point(|&c| c < u).clamp(1, n_grid - 1);
                    let (c0, c1) = (cdf[idx - 1], cdf[idx]);
                    let frac = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.5 };
                    (phi, xs[idx - 1] + frac * dx)
                })
                .collect()
        })
        .collect();
    let samples: Vec<(f64, f64)> = per_phase.into_iter().flatten().collect();
    QuadratureDataset::new(samples, 1.0, Some(seed))
}

/// Rescale a dataset so the accompanying vacuum dataset has variance 1/2.
pub fn scale_to_vacuum(
    dataset: &QuadratureDataset,
    vacuum: &QuadratureDataset,
) -> Result<QuadratureDataset> {
    if vacuum.samples.is_empty() {
        return Err(Error::validation("vacuum dataset is empty"));
    }
    let xs: Vec<f64> = vacuum.samples.iter().map(|&(_, x)| x).collect();
    let var = numerics::variance(&xs);
    if var <= 0.0 {
        return Err(Error::validation("vacuum dataset has zero variance"));
    }
    let factor = (0.5 / var).sqrt();
    let samples = dataset
        .samples
        .iter()
        .map(|&(phi, x)| (phi, factor * x))
        .collect();
    QuadratureDataset::new(samples, dataset.vacuum_scale * factor, dataset.seed)
}

/// Truncated back-projection kernel
/// K(z) = ½∫_{−k_c}^{k_c} |ξ| e^{iξz} dξ = (cos(k_c z) + k_c z sin(k_c z) − 1)/z²,
/// with the series fallback k_c²/2 − k_c⁴z²/8 + k_c⁶z⁴/144 near z = 0.
pub fn fbp_kernel(z: f64, k_c: f64) -> f64 {
    let az = z.abs();
    if az < 1e-4 {
        let z2 = z * z;
        let k2 = k_c * k_c;
        return k2 / 2.0 - k2 * k2 * z2 / 8.0 + k2 * k2 * k2 * z2 * z2 / 144.0;
    }
    let u = k_c * z;
    (u.cos() + u * u.sin() - 1.0) / (z * z)
}

/// Filtered back-projection of the Wigner function from quadrature samples:
/// W(x, p) = (1/(π N)) Σ_k K(x cos φ_k + p sin φ_k − x_k), which lands in the
/// same displaced-parity normalization as the analytic grids (vacuum peak
/// 2/π, unit integral in the d²β measure).
pub fn reconstruct_wigner_fbp(
    dataset: &QuadratureDataset,
    k_c: f64,
    x_axis: &[f64],
    p_axis: &[f64],
) -> Result<WignerGrid> {
    if !(k_c > 0.0) {
        return Err(Error::validation("k_c must be positive"));
    }
    let phases = dataset.phases();
    if phases.len() < 8 {
        return Err(Error::validation(format!(
            "need at least 8 distinct phases spanning [0, π), got {}",
            phases.len()
        )));
    }
    let n = dataset.samples.len() as f64;
    let nx = x_axis.len();
    let rows: Vec<Vec<f64>> = p_axis
        .par_iter()
        .map(|&p| {
            let mut row = Vec::with_capacity(nx);
            for &x in x_axis {
                let mut acc = 0.0;
                for &(phi, xk) in &dataset.samples {
                    acc += fbp_kernel(x * phi.cos() + p * phi.sin() - xk, k_c);
                }
                row.push(acc / (PI * n));
            }
            row
        })
        .collect();
    let mut values = Vec::with_capacity(nx * p_axis.len());
    for row in rows {
        values.extend(row);
    }
    WignerGrid::new(x_axis.to_vec(), p_axis.to_vec(), values)
}

/// Result of the iterative maximum-likelihood reconstruction.
#[derive(Debug, Clone)]
pub struct MlReconstruction {
    pub rho: DensityMatrix,
    /// Per-iteration log-likelihood; non-decreasing by construction.
    pub log_likelihood: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Iterative maximum-likelihood estimate of ρ in the Fock basis from
/// quadrature samples (expectation-operator fixed point ρ → R ρ R with
/// diluted steps whenever a full step would decrease the likelihood).
///
/// Non-convergence after `max_iterations` returns the last iterate inside
/// the error value.
pub fn reconstruct_density_matrix(
    dataset: &QuadratureDataset,
    n_max: usize,
    max_iterations: usize,
) -> std::result::Result<MlReconstruction, (Error, Box<MlReconstruction>)> {
    let tol = 1e-8;
    let dim = n_max + 1;
    let s = dataset.samples.len();
    assert!(s > 0, "empty dataset");

    // measurement vectors u_k[n] = ψ_n(x_k) e^{i n φ_k}
    let proj: Vec<DVector<C64>> = dataset
        .samples
        .par_iter()
        .map(|&(phi, x)| {
            DVector::from_iterator(
                dim,
                (0..dim).map(|nn| {
                    C64::from_polar(1.0, nn as f64 * phi) * harmonic_wavefunction(nn, x)
                }),
            )
        })
        .collect();

    let mut rho = DMatrix::<C64>::identity(dim, dim) / C64::from(dim as f64);
    let mut loglik_trace = Vec::new();
    let probs = |rho: &DMatrix<C64>| -> (Vec<f64>, f64) {
        let chunks: Vec<(Vec<f64>, f64)> = proj
            .par_chunks(4096)
            .map(|chunk| {
                let mut ps = Vec::with_capacity(chunk.len());
                let mut ll = 0.0;
                for u in chunk {
                    let p = (u.adjoint() * rho * u)[(0, 0)].re.max(1e-300);
                    ps.push(p);
                    ll += p.ln();
                }
                (ps, ll)
            })
            .collect();
        let mut ps = Vec::with_capacity(s);
        let mut ll = 0.0;
        for (p, l) in chunks {
            ps.extend(p);
            ll += l;
        }
        (ps, ll)
    };

    let (mut p_cur, mut ll_cur) = probs(&rho);
    loglik_trace.push(ll_cur);
    let mut converged = false;
    let mut iterations = 0;

    for it in 0..max_iterations {
        iterations = it + 1;
        // R = (1/S) Σ_k |u_k⟩⟨u_k| / p_k, accumulated in deterministic order
        let partials: Vec<DMatrix<C64>> = proj
            .par_chunks(4096)
            .enumerate()
            .map(|(c, chunk)| {
                let mut m = DMatrix::<C64>::zeros(dim, dim);
                for (i, u) in chunk.iter().enumerate() {
                    let p = p_cur[c * 4096 + i];
                    let w = C64::from(1.0 / (s as f64 * p));
                    m.gerc(w, u, u, C64::from(1.0));
                }
                m
            })
            .collect();
        let mut r = DMatrix::<C64>::zeros(dim, dim);
        for m in partials {
            r += m;
        }

        // diluted step: shrink toward the identity until the likelihood
        // does not decrease
        let mut accepted = false;
        let mut lambda = 1.0;
        for _ in 0..20 {
            let step = if lambda == 1.0 {
                r.clone()
            } else {
                DMatrix::<C64>::identity(dim, dim) * C64::from(1.0 - lambda) + &r * C64::from(lambda)
            };
            let mut trial = &step * &rho * &step;
            let trace: C64 = (0..dim).map(|i| trial[(i, i)]).sum();
            trial /= trace;
            // enforce exact Hermiticity against accumulated rounding
            let trial = (trial.clone() + trial.adjoint()) * C64::from(0.5);
            let (p_new, ll_new) = probs(&trial);
            if ll_new >= ll_cur - 1e-12 * ll_cur.abs().max(1.0) {
                let rel = (ll_new - ll_cur).abs() / ll_cur.abs().max(1.0);
                rho = trial;
                p_cur = p_new;
                ll_cur = ll_new;
                loglik_trace.push(ll_cur);
                accepted = true;
                if rel < tol {
                    converged = true;
                }
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            converged = true; // likelihood stationary to machine precision
            break;
        }
        if converged {
            break;
        }
    }

    let build = |rho: DMatrix<C64>| -> Result<DensityMatrix> {
        // clip numerically negative eigenvalues before validation
        let eig = rho.clone().symmetric_eigen();
        let mut vals = eig.eigenvalues.clone();
        let mut changed = false;
        for v in vals.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
                changed = true;
            }
        }
        let rho = if changed {
            let total: f64 = vals.iter().sum();
            let d = DMatrix::<C64>::from_diagonal(&vals.map(|v| C64::from(v / total)));
            &eig.eigenvectors * d * eig.eigenvectors.adjoint()
        } else {
            rho
        };
        let rho = (rho.clone() + rho.adjoint()) * C64::from(0.5);
        DensityMatrix::new(rho)
    };

    let rho_final = match build(rho) {
        Ok(r) => r,
        Err(e) => {
            return Err((
                e,
                Box::new(MlReconstruction {
                    rho: DensityMatrix::from_pure(&vec![C64::new(1.0, 0.0); 1]).unwrap(),
                    log_likelihood: loglik_trace,
                    iterations,
                    converged: false,
                }),
            ))
        }
    };
    let out = MlReconstruction {
        rho: rho_final,
        log_likelihood: loglik_trace,
        iterations,
        converged,
    };
    if out.converged {
        Ok(out)
    } else {
        Err((
            Error::NoConvergence {
                context: "maximum-likelihood tomography".into(),
                detail: format!(
                    "likelihood change above {tol:.0e} after {} iterations",
                    out.iterations
                ),
            },
            Box::new(out),
        ))
    }
}

/// Mean photon number ⟨n⟩ = Σ n ρ_nn.
pub fn mean_photon_from_rho(rho: &DensityMatrix) -> f64 {
    rho.diagonal()
        .iter()
        .enumerate()
        .map(|(n, &p)| n as f64 * p)
        .sum()
}

/// Pointwise error summary between a reconstruction and a reference grid.
#[derive(Debug, Clone, Copy)]
pub struct WignerError {
    pub max_abs: f64,
    pub rmse: f64,
}

pub fn wigner_error_estimate(
    reconstructed: &WignerGrid,
    reference: &WignerGrid,
) -> Result<WignerError> {
    if reconstructed.x_axis != reference.x_axis || reconstructed.p_axis != reference.p_axis {
        return Err(Error::GridMismatch(
            "reconstruction and reference grids use different axes".into(),
        ));
    }
    let mut max_abs = 0.0_f64;
    let mut sq = 0.0;
    for (a, b) in reconstructed.values.iter().zip(&reference.values) {
        let d = a - b;
        max_abs = max_abs.max(d.abs());
        sq += d * d;
    }
    Ok(WignerError {
        max_abs,
        rmse: (sq / reconstructed.values.len() as f64).sqrt(),
    })
}

/// Evenly spaced phases in [0, π).
pub fn phase_grid(n: usize) -> Vec<f64> {
    (0..n).map(|k| PI * k as f64 / n as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hhg::condition_on_hhg;
    use crate::quantum::integrate_wigner;

    #[test]
    fn quadrature_distribution_basics() {
        // vacuum: Gaussian with variance 1/2 at any phase
        let vac = TomoState::vacuum();
        for phi in [0.0, 0.7, 2.1] {
            let p0 = quadrature_distribution(&vac, phi, 0.0);
            assert!((p0 - 1.0 / PI.sqrt()).abs() < 1e-12);
            let second: f64 = {
                let n = 4001;
                let dx = 16.0 / (n as f64 - 1.0);
                let y: Vec<f64> = (0..n)
                    .map(|i| {
                        let x = -8.0 + i as f64 * dx;
                        x * x * quadrature_distribution(&vac, phi, x)
                    })
                    .collect();
                numerics::trapezoid(&y, dx)
            };
            assert!((second - 0.5).abs() < 1e-9);
        }

        // coherent at φ=0: Gaussian centered √2 Re α
        let alpha = C64::new(1.1, -0.4);
        let st = TomoState::Coherent(alpha);
        let xc = std::f64::consts::SQRT_2 * alpha.re;
        let at_peak = quadrature_distribution(&st, 0.0, xc);
        for dx in [-0.4, 0.3] {
            assert!(quadrature_distribution(&st, 0.0, xc + dx) < at_peak);
        }
    }

    #[test]
    fn cat_distribution_normalized_over_phases() {
        let cat = condition_on_hhg(C64::new(1.4, 0.0), C64::new(-0.5, 0.0)).unwrap();
        let st = TomoState::Cat(cat);
        let n = 8001;
        let dx = 24.0 / (n as f64 - 1.0);
        for k in 0..16 {
            let phi = PI * k as f64 / 16.0;
            let y: Vec<f64> = (0..n)
                .map(|i| quadrature_distribution(&st, phi, -12.0 + i as f64 * dx))
                .collect();
            let total = numerics::trapezoid(&y, dx);
            assert!((total - 1.0).abs() < 1e-8, "phi={phi}: {total}");
        }
    }

    #[test]
    fn density_route_matches_cat_route() {
        let cat = condition_on_hhg(C64::new(1.2, 0.3), C64::new(-0.5, 0.1)).unwrap();
        let rho = DensityMatrix::from_pure(&cat.fock_coefficients(40)).unwrap();
        let s_cat = TomoState::Cat(cat);
        let s_rho = TomoState::Density(rho);
        for phi in [0.0, 0.9, 1.7, 2.8] {
            for x in [-2.5, -0.4, 0.8, 2.9] {
                let a = quadrature_distribution(&s_cat, phi, x);
                let b = quadrature_distribution(&s_rho, phi, x);
                assert!((a - b).abs() < 1e-10, "phi={phi} x={x}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn homodyne_sampling_moments_and_determinism() {
        let phases = phase_grid(10);
        let vac = sample_homodyne(&TomoState::vacuum(), &phases, 10_000, 42).unwrap();
        let xs: Vec<f64> = vac.samples.iter().map(|&(_, x)| x).collect();
        assert!((numerics::mean(&xs)).abs() < 0.01);
        assert!((numerics::variance(&xs) - 0.5).abs() < 0.01);

        let again = sample_homodyne(&TomoState::vacuum(), &phases, 10_000, 42).unwrap();
        assert_eq!(vac.samples, again.samples);
        let other = sample_homodyne(&TomoState::vacuum(), &phases, 10_000, 43).unwrap();
        assert_ne!(vac.samples, other.samples);

        // per-phase mean of a coherent state traces √2 Re(α e^{−iφ})
        let alpha = C64::new(1.0, 0.5);
        let st = TomoState::Coherent(alpha);
        let data = sample_homodyne(&st, &phases, 4000, 7).unwrap();
        for (k, &phi) in phases.iter().enumerate() {
            let xs: Vec<f64> = data.samples[k * 4000..(k + 1) * 4000]
                .iter()
                .map(|&(_, x)| x)
                .collect();
            let expect = std::f64::consts::SQRT_2 * (alpha * C64::from_polar(1.0, -phi)).re;
            let sigma = (0.5_f64 / 4000.0).sqrt();
            assert!(
                (numerics::mean(&xs) - expect).abs() < 4.0 * sigma + 0.01,
                "phi={phi}"
            );
        }
    }

    #[test]
    fn vacuum_scaling() {
        let phases = phase_grid(8);
        let vac = sample_homodyne(&TomoState::vacuum(), &phases, 5000, 1).unwrap();
        let scaled = scale_to_vacuum(&vac, &vac).unwrap();
        assert!((scaled.vacuum_scale - 1.0).abs() < 1e-2);
        assert_eq!(scaled.samples.len(), vac.samples.len());

        // vacuum with variance 2.0 → scale 1/2
        let wide = QuadratureDataset::new(
            vac.samples.iter().map(|&(p, x)| (p, 2.0 * x)).collect(),
            1.0,
            None,
        )
        .unwrap();
        let fixed = scale_to_vacuum(&wide, &wide).unwrap();
        let factor = fixed.samples[0].1 / wide.samples[0].1;
        assert!((factor - 0.5).abs() < 0.01);

        let flat = QuadratureDataset::new(vec![(0.1, 1.0); 10], 1.0, None).unwrap();
        assert!(scale_to_vacuum(&flat, &flat).is_err());
    }

    #[test]
    fn kernel_closed_form_vs_quadrature() {
        let k_c = 4.7;
        assert!((fbp_kernel(0.0, k_c) - 11.045).abs() < 1e-10);
        // numeric quadrature oracle of ∫₀^{k_c} ξ cos(ξ z) dξ
        let oracle = |z: f64| {
            let f = |xi: f64| C64::from(xi * (xi * z).cos());
            numerics::adaptive_simpson(&f, 0.0, k_c, 1e-13).re
        };
        let mut z = -10.0;
        while z <= 10.0 {
            assert!(
                (fbp_kernel(z, k_c) - oracle(z)).abs() < 1e-8,
                "z={z}: {} vs {}",
                fbp_kernel(z, k_c),
                oracle(z)
            );
            assert!((fbp_kernel(-z, k_c) - fbp_kernel(z, k_c)).abs() < 1e-14);
            z += 0.37;
        }
        // series/closed-form continuity at the switch point
        let a = fbp_kernel(0.99e-4, k_c);
        let b = fbp_kernel(1.01e-4, k_c);
        assert!((a - b).abs() < 3e-8);
    }

    #[test]
    fn fbp_vacuum_roundtrip() {
        let phases = phase_grid(20);
        let data = sample_homodyne(&TomoState::vacuum(), &phases, 5000, 11).unwrap();
        let xs = WignerGrid::axis(-4.0, 4.0, 81);
        let ps = WignerGrid::axis(-4.0, 4.0, 81);
        let rec = reconstruct_wigner_fbp(&data, DEFAULT_KC, &xs, &ps).unwrap();
        // analytic vacuum in the same convention
        let analytic: Vec<f64> = ps
            .iter()
            .flat_map(|&p| {
                xs.iter()
                    .map(move |&x| 2.0 / PI * (-(x * x + p * p)).exp())
                    .collect::<Vec<_>>()
            })
            .collect();
        let reference = WignerGrid::new(xs.clone(), ps.clone(), analytic).unwrap();
        let err = wigner_error_estimate(&rec, &reference).unwrap();
        assert!(err.rmse < 0.01, "rmse {}", err.rmse);
        let peak = rec.max();
        assert!((peak - 2.0 / PI).abs() < 0.02, "peak {peak}");
        assert!((integrate_wigner(&rec) - 1.0).abs() < 0.05);
    }

    #[test]
    fn fbp_requires_phase_coverage() {
        let data = QuadratureDataset::new(vec![(0.0, 0.1); 100], 1.0, None).unwrap();
        let xs = WignerGrid::axis(-2.0, 2.0, 33);
        assert!(reconstruct_wigner_fbp(&data, DEFAULT_KC, &xs, &xs).is_err());
    }

    #[test]
    fn fbp_linearity_in_dataset() {
        let phases = phase_grid(9);
        let d1 = sample_homodyne(&TomoState::vacuum(), &phases, 300, 3).unwrap();
        let d2 = sample_homodyne(&TomoState::Coherent(C64::new(0.5, 0.0)), &phases, 600, 4)
            .unwrap();
        let mut both = d1.samples.clone();
        both.extend(d2.samples.iter().cloned());
        let dboth = QuadratureDataset::new(both, 1.0, None).unwrap();
        let xs = WignerGrid::axis(-3.0, 3.0, 41);
        let r1 = reconstruct_wigner_fbp(&d1, DEFAULT_KC, &xs, &xs).unwrap();
        let r2 = reconstruct_wigner_fbp(&d2, DEFAULT_KC, &xs, &xs).unwrap();
        let rb = reconstruct_wigner_fbp(&dboth, DEFAULT_KC, &xs, &xs).unwrap();
        let (n1, n2) = (d1.samples.len() as f64, d2.samples.len() as f64);
        for k in 0..rb.values.len() {
            let expect = (n1 * r1.values[k] + n2 * r2.values[k]) / (n1 + n2);
            assert!((rb.values[k] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn fbp_ringing_grows_with_kc() {
        // coarse dataset: far-field oscillation amplitude grows when k_c is
        // doubled (why k_c ≈ 4.7 is the preset)
        let phases = phase_grid(12);
        let data = sample_homodyne(&TomoState::vacuum(), &phases, 200, 9).unwrap();
        let xs = WignerGrid::axis(-6.0, 6.0, 121);
        let lo = reconstruct_wigner_fbp(&data, 4.7, &xs, &xs).unwrap();
        let hi = reconstruct_wigner_fbp(&data, 9.4, &xs, &xs).unwrap();
        let far_amp = |g: &WignerGrid| -> f64 {
            let mut amp = 0.0_f64;
            for (ip, &p) in g.p_axis.iter().enumerate() {
                for (ix, &x) in g.x_axis.iter().enumerate() {
                    if x * x + p * p > 16.0 {
                        amp = amp.max(g.at(ix, ip).abs());
                    }
                }
            }
            amp
        };
        assert!(
            far_amp(&hi) > 1.5 * far_amp(&lo),
            "ringing did not grow: {} vs {}",
            far_amp(&hi),
            far_amp(&lo)
        );
    }

    #[test]
    fn ml_vacuum_and_coherent() {
        let phases = phase_grid(12);
        let vac = sample_homodyne(&TomoState::vacuum(), &phases, 800, 21).unwrap();
        let rec = reconstruct_density_matrix(&vac, 6, 300)
            .unwrap_or_else(|(_, r)| *r);
        assert!(rec.rho.rho[(0, 0)].re > 0.98, "rho00 = {}", rec.rho.rho[(0, 0)].re);
        // monotone log-likelihood
        for w in rec.log_likelihood.windows(2) {
            assert!(w[1] >= w[0] - 1e-9 * w[0].abs());
        }

        let coh = sample_homodyne(&TomoState::Coherent(C64::new(1.0, 0.0)), &phases, 2500, 22)
            .unwrap();
        let rec = reconstruct_density_matrix(&coh, 10, 400).unwrap_or_else(|(_, r)| *r);
        let diag = rec.rho.diagonal();
        let mut tv = 0.0;
        for n in 0..=10 {
            let poisson = (-1.0_f64).exp() / (1..=n).map(|k| k as f64).product::<f64>().max(1.0);
            tv += 0.5 * (diag[n] - poisson).abs();
        }
        assert!(tv < 0.02, "total variation {tv}");
        let n_mean = mean_photon_from_rho(&rec.rho);
        assert!((n_mean - 1.0).abs() < 0.05, "mean {n_mean}");
    }

    #[test]
    fn ml_converges_with_shots_in_expectation() {
        // mean-photon error decreases with sample size, averaged over seeds
        let phases = phase_grid(10);
        let alpha = C64::new(1.0, 0.0);
        let mut avg_err = Vec::new();
        for &shots in &[150usize, 600, 2400] {
            let mut acc = 0.0;
            for seed in 0..5 {
                let data =
                    sample_homodyne(&TomoState::Coherent(alpha), &phases, shots, 100 + seed)
                        .unwrap();
                let rec = reconstruct_density_matrix(&data, 8, 250).unwrap_or_else(|(_, r)| *r);
                acc += (mean_photon_from_rho(&rec.rho) - 1.0).abs();
            }
            avg_err.push(acc / 5.0);
        }
        assert!(
            avg_err[2] < avg_err[0],
            "error did not shrink: {avg_err:?}"
        );
    }

    #[test]
    fn wigner_error_estimate_basics() {
        let xs = WignerGrid::axis(-1.0, 1.0, 11);
        let g = WignerGrid::new(xs.clone(), xs.clone(), vec![0.3; 121]).unwrap();
        let same = wigner_error_estimate(&g, &g).unwrap();
        assert_eq!(same.max_abs, 0.0);
        let shifted = WignerGrid::new(xs.clone(), xs.clone(), vec![0.304; 121]).unwrap();
        let err = wigner_error_estimate(&g, &shifted).unwrap();
        assert!((err.max_abs - 0.004).abs() < 1e-15);
        let other = WignerGrid::new(WignerGrid::axis(-2.0, 1.0, 11), xs, vec![0.3; 121]).unwrap();
        assert!(wigner_error_estimate(&g, &other).is_err());
    }

    #[test]
    fn dataset_csv_roundtrip() {
        let phases = phase_grid(9);
        let data = sample_homodyne(&TomoState::vacuum(), &phases, 50, 5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("quad.csv");
        data.write_csv(&path).unwrap();
        let back = QuadratureDataset::read_csv(&path).unwrap();
        assert_eq!(back.samples.len(), data.samples.len());
        assert_eq!(back.seed, Some(5));
        for k in 0..data.samples.len() {
            assert!((back.samples[k].0 - data.samples[k].0).abs() < 1e-16);
            assert!((back.samples[k].1 - data.samples[k].1).abs() < 1e-16);
        }
    }
}
