//! Shared quantum-optical kernel: coherent-state amplitudes and overlaps,
//! Fock expansions, Wigner evaluation/integration, and density matrices.
//!
//! One quadrature convention is used everywhere: `x̂ = (â + â†)/√2`,
//! vacuum variance 1/2, so a coherent state |α⟩ peaks at
//! (x, p) = (√2 Re α, √2 Im α). Mixing conventions is the classic source of
//! silent √2 bugs, hence the tag carried by [`WignerGrid`].

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Convention tag attached to every Wigner grid.
pub const QUADRATURE_CONVENTION: &str = "x=(a+a†)/√2, vacuum variance 1/2";

const FOCK_TAIL_TOL: f64 = 1e-12;

/// ⟨x|α⟩ = π^{−1/4} exp[−(x − √2 Re α)²/2 + i x √2 Im α − i Re α Im α].
///
/// The trailing −i Re α Im α keeps the amplitude consistent with the Fock
/// expansion ⟨x|α⟩ = Σ_n ⟨n|α⟩ ψ_n(x) and with ∫⟨α|x⟩⟨x|β⟩dx = ⟨α|β⟩;
/// dropping it (a common shorthand) breaks interference between two
/// different coherent amplitudes.
pub fn coherent_position_amplitude(x: f64, alpha: C64) -> C64 {
    let xc = std::f64::consts::SQRT_2 * alpha.re;
    let pc = std::f64::consts::SQRT_2 * alpha.im;
    let mag = -0.25 * std::f64::consts::PI.ln() - 0.5 * (x - xc) * (x - xc);
    C64::new(mag, x * pc - alpha.re * alpha.im).exp()
}

/// Overlap ⟨α|α+δ⟩ = e^{(α*δ − αδ*)/2} e^{−|δ|²/2}.
pub fn coherent_overlap(alpha: C64, beta_shifted: C64) -> C64 {
    let delta = beta_shifted - alpha;
    let phase = 0.5 * (alpha.conj() * delta - alpha * delta.conj());
    (phase - 0.5 * delta.norm_sqr()).exp()
}

/// Natural log of n!.
pub fn ln_factorial(n: usize) -> f64 {
    // cached cumulative sum; cheap to extend
    fn build(n: usize) -> Vec<f64> {
        let mut v = Vec::with_capacity(n + 1);
        v.push(0.0);
        for k in 1..=n {
            v.push(v[k - 1] + (k as f64).ln());
        }
        v
    }
    thread_local! {
        static TABLE: std::cell::RefCell<Vec<f64>> = std::cell::RefCell::new(build(128));
    }
    TABLE.with(|t| {
        let mut t = t.borrow_mut();
        if n >= t.len() {
            *t = build(n.max(2 * t.len()));
        }
        t[n]
    })
}

/// Fock coefficient ⟨n|α⟩ = e^{−|α|²/2} α^n / √(n!), evaluated in log space.
pub fn coherent_fock_coefficient(n: usize, alpha: C64) -> C64 {
    let r = alpha.norm();
    if r == 0.0 {
        return if n == 0 { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
    }
    let ln_mag = -0.5 * r * r + n as f64 * r.ln() - 0.5 * ln_factorial(n);
    C64::from_polar(ln_mag.exp(), n as f64 * alpha.arg())
}

/// Smallest Fock cutoff such that the Poisson tail of |α|² beyond it is
/// below `tol`.
pub fn required_fock_cutoff(alpha: C64, tol: f64) -> usize {
    let lambda = alpha.norm_sqr();
    if lambda == 0.0 {
        return 0;
    }
    let mut cumulative = 0.0;
    let mut n = 0usize;
    loop {
        let ln_p = -lambda + n as f64 * lambda.ln() - ln_factorial(n);
        cumulative += ln_p.exp();
        if 1.0 - cumulative < tol {
            return n;
        }
        n += 1;
        if n > 100_000 {
            return n;
        }
    }
}

/// Unnormalized Fock coefficients of Σ_k coeff_k |α_k⟩,
/// c_n = Σ_k coeff_k e^{−|α_k|²/2} α_k^n/√(n!).
///
/// Fails if `n_max` leaves more than 1e−12 Poisson tail mass for any term;
/// the error names the cutoff that would suffice.
pub fn fock_expand_superposition(terms: &[(C64, C64)], n_max: usize) -> Result<Vec<C64>> {
    let mut required = 0usize;
    for &(_, alpha) in terms {
        required = required.max(required_fock_cutoff(alpha, FOCK_TAIL_TOL));
    }
    if n_max < required {
        return Err(Error::validation(format!(
            "n_max = {n_max} leaves Poisson tail mass above {FOCK_TAIL_TOL:.0e}; need n_max >= {required}"
        )));
    }
    let mut c = vec![C64::new(0.0, 0.0); n_max + 1];
    for &(coeff, alpha) in terms {
        for (n, cn) in c.iter_mut().enumerate() {
            *cn += coeff * coherent_fock_coefficient(n, alpha);
        }
    }
    Ok(c)
}

/// Real-valued Wigner function sampled on a rectangular (x, p) grid.
///
/// `values` is stored row-major as `values[ip * x_axis.len() + ix]`.
#[derive(Debug, Clone)]
pub struct WignerGrid {
    pub x_axis: Vec<f64>,
    pub p_axis: Vec<f64>,
    pub values: Vec<f64>,
    pub convention: &'static str,
}

impl WignerGrid {
    pub fn new(x_axis: Vec<f64>, p_axis: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if values.len() != x_axis.len() * p_axis.len() {
            return Err(Error::GridMismatch(format!(
                "values length {} != {} x {}",
                values.len(),
                p_axis.len(),
                x_axis.len()
            )));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::validation("Wigner grid contains non-finite values"));
        }
        Ok(WignerGrid {
            x_axis,
            p_axis,
            values,
            convention: QUADRATURE_CONVENTION,
        })
    }

    /// Uniform axis from `min` to `max` with `n` samples.
    pub fn axis(min: f64, max: f64, n: usize) -> Vec<f64> {
        assert!(n >= 2 && max > min);
        (0..n)
            .map(|i| min + (max - min) * i as f64 / (n as f64 - 1.0))
            .collect()
    }

    pub fn at(&self, ix: usize, ip: usize) -> f64 {
        self.values[ip * self.x_axis.len() + ix]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// (x, p) position of the grid maximum.
    pub fn argmax(&self) -> (f64, f64) {
        let mut best = (0usize, 0usize);
        let mut bv = f64::NEG_INFINITY;
        for ip in 0..self.p_axis.len() {
            for ix in 0..self.x_axis.len() {
                let v = self.at(ix, ip);
                if v > bv {
                    bv = v;
                    best = (ix, ip);
                }
            }
        }
        (self.x_axis[best.0], self.p_axis[best.1])
    }

    /// Integral of the negative part, ∫∫ min(W, 0) dx dp (a ≤ 0 number).
    pub fn negativity_volume(&self) -> f64 {
        let clipped: Vec<f64> = self.values.iter().map(|&v| v.min(0.0)).collect();
        let g = WignerGrid {
            x_axis: self.x_axis.clone(),
            p_axis: self.p_axis.clone(),
            values: clipped,
            convention: self.convention,
        };
        integrate_wigner(&g)
    }

    /// ⟨n⟩ = ∫∫ W (x²+p²)/2 dx dp − 1/2 for a normalized grid.
    pub fn mean_photon(&self) -> f64 {
        let weighted: Vec<f64> = self
            .p_axis
            .iter()
            .flat_map(|&p| {
                self.x_axis
                    .iter()
                    .map(move |&x| 0.5 * (x * x + p * p))
                    .collect::<Vec<_>>()
            })
            .zip(self.values.iter())
            .map(|(w, &v)| w * v)
            .collect();
        let g = WignerGrid {
            x_axis: self.x_axis.clone(),
            p_axis: self.p_axis.clone(),
            values: weighted,
            convention: self.convention,
        };
        integrate_wigner(&g) - 0.5
    }

    /// Nearest grid value to the phase-space point β (coherent-amplitude
    /// units): samples W at (√2 Re β, √2 Im β).
    pub fn value_near(&self, beta: C64) -> f64 {
        let x = std::f64::consts::SQRT_2 * beta.re;
        let p = std::f64::consts::SQRT_2 * beta.im;
        let ix = nearest_index(&self.x_axis, x);
        let ip = nearest_index(&self.p_axis, p);
        self.at(ix, ip)
    }

    /// Write the grid as a CSV matrix with axis header rows.
    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        use std::io::Write;
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "# wigner convention={}", self.convention)?;
        write!(f, "x")?;
        for x in &self.x_axis {
            write!(f, ",{x:.17e}")?;
        }
        writeln!(f)?;
        for (ip, p) in self.p_axis.iter().enumerate() {
            write!(f, "{p:.17e}")?;
            for ix in 0..self.x_axis.len() {
                write!(f, ",{:.17e}", self.at(ix, ip))?;
            }
            writeln!(f)?;
        }
        Ok(())
    }

    /// Read a grid written by [`WignerGrid::write_csv`].
    pub fn read_csv(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut x_axis = Vec::new();
        let mut p_axis = Vec::new();
        let mut values = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if line.starts_with('x') {
                x_axis = line
                    .split(',')
                    .skip(1)
                    .map(|s| parse_f64(s, lineno + 1))
                    .collect::<Result<_>>()?;
                continue;
            }
            let mut parts = line.split(',');
            let p = parse_f64(
                parts.next().ok_or_else(|| Error::Parse {
                    line: lineno + 1,
                    msg: "empty row".into(),
                })?,
                lineno + 1,
            )?;
            p_axis.push(p);
            for s in parts {
                values.push(parse_f64(s, lineno + 1)?);
            }
        }
        WignerGrid::new(x_axis, p_axis, values)
    }
}

/// Position-space harmonic eigenfunction ψ_n(x) in the vacuum-variance-1/2
/// convention, via the stable two-term recurrence.
pub fn harmonic_wavefunction(n: usize, x: f64) -> f64 {
    let psi0 = std::f64::consts::PI.powf(-0.25) * (-0.5 * x * x).exp();
    if n == 0 {
        return psi0;
    }
    let mut prev = psi0;
    let mut cur = std::f64::consts::SQRT_2 * x * psi0;
    for k in 2..=n {
        let kf = k as f64;
        let next = (2.0 / kf).sqrt() * x * cur - ((kf - 1.0) / kf).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Check that the axes cover every coherent center plus a 4σ margin
/// (σ = 1/√2 in quadrature units).
pub(crate) fn grid_spans_centers(x_axis: &[f64], p_axis: &[f64], centers: &[C64]) -> Result<()> {
    const MARGIN: f64 = 4.0 / std::f64::consts::SQRT_2;
    let (x_min, x_max) = (x_axis[0], *x_axis.last().unwrap());
    let (p_min, p_max) = (p_axis[0], *p_axis.last().unwrap());
    for c in centers {
        let cx = std::f64::consts::SQRT_2 * c.re;
        let cp = std::f64::consts::SQRT_2 * c.im;
        if cx - MARGIN < x_min || cx + MARGIN > x_max || cp - MARGIN < p_min || cp + MARGIN > p_max
        {
            return Err(Error::validation(format!(
                "grid [{x_min},{x_max}]x[{p_min},{p_max}] does not span coherent center ({cx:.2},{cp:.2}) + 4σ"
            )));
        }
    }
    Ok(())
}

fn nearest_index(axis: &[f64], v: f64) -> usize {
    let mut best = 0;
    let mut bd = f64::INFINITY;
    for (i, &a) in axis.iter().enumerate() {
        let d = (a - v).abs();
        if d < bd {
            bd = d;
            best = i;
        }
    }
    best
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|e| Error::Parse {
        line,
        msg: format!("bad float {s:?}: {e}"),
    })
}

/// Trapezoidal double integral of a Wigner grid in the coherent-amplitude
/// measure d²β = dx dp / 2.
///
/// Grids carry the displaced-parity normalization (vacuum peak 2/π) on
/// quadrature axes (coherent peak at √2 Re α), so the unit-integral measure
/// is d²β; the factor 1/2 is that Jacobian.
pub fn integrate_wigner(grid: &WignerGrid) -> f64 {
    let nx = grid.x_axis.len();
    let np = grid.p_axis.len();
    if nx < 2 || np < 2 {
        return 0.0;
    }
    let wx: Vec<f64> = axis_weights(&grid.x_axis);
    let wp: Vec<f64> = axis_weights(&grid.p_axis);
    let mut acc = 0.0;
    for ip in 0..np {
        let mut row = 0.0;
        for ix in 0..nx {
            row += wx[ix] * grid.at(ix, ip);
        }
        acc += wp[ip] * row;
    }
    0.5 * acc
}

fn axis_weights(axis: &[f64]) -> Vec<f64> {
    let n = axis.len();
    let mut w = vec![0.0; n];
    for i in 0..n - 1 {
        let h = axis[i + 1] - axis[i];
        w[i] += 0.5 * h;
        w[i + 1] += 0.5 * h;
    }
    w
}

/// Hermitian density matrix in the Fock basis, 0..=n_max.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    pub n_max: usize,
    pub rho: DMatrix<C64>,
}

impl DensityMatrix {
    /// Validate Hermiticity (1e−10), unit trace (1e−8), and positivity
    /// (eigenvalues ≥ −1e−8).
    pub fn new(rho: DMatrix<C64>) -> Result<Self> {
        if rho.nrows() != rho.ncols() || rho.nrows() == 0 {
            return Err(Error::validation("density matrix must be square and nonempty"));
        }
        let n = rho.nrows();
        for i in 0..n {
            for j in 0..n {
                if (rho[(i, j)] - rho[(j, i)].conj()).norm() > 1e-10 {
                    return Err(Error::validation(format!(
                        "density matrix not Hermitian at ({i},{j})"
                    )));
                }
            }
        }
        let trace: C64 = (0..n).map(|i| rho[(i, i)]).sum();
        if (trace.re - 1.0).abs() > 1e-8 || trace.im.abs() > 1e-8 {
            return Err(Error::validation(format!(
                "density matrix trace {trace} != 1"
            )));
        }
        let eig = rho.clone().symmetric_eigen();
        if eig.eigenvalues.iter().any(|&l| l < -1e-8) {
            return Err(Error::validation(format!(
                "density matrix has negative eigenvalue {:.3e}",
                eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
            )));
        }
        Ok(DensityMatrix { n_max: n - 1, rho })
    }

    /// Pure state ρ = |ψ⟩⟨ψ| from (unnormalized) Fock coefficients.
    pub fn from_pure(coefficients: &[C64]) -> Result<Self> {
        let norm_sq: f64 = coefficients.iter().map(|c| c.norm_sqr()).sum();
        if norm_sq <= 0.0 {
            return Err(Error::validation("cannot normalize a null state"));
        }
        let n = coefficients.len();
        let mut rho = DMatrix::<C64>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                rho[(i, j)] = coefficients[i] * coefficients[j].conj() / norm_sq;
            }
        }
        DensityMatrix::new(rho)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..=self.n_max).map(|i| self.rho[(i, i)].re).collect()
    }

    /// CSV rows `n,m,re,im`.
    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        use std::io::Write;
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "n,m,re,im")?;
        for n in 0..=self.n_max {
            for m in 0..=self.n_max {
                let v = self.rho[(n, m)];
                writeln!(f, "{n},{m},{:.17e},{:.17e}", v.re, v.im)?;
            }
        }
        Ok(())
    }

    pub fn read_csv(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut entries: Vec<(usize, usize, C64)> = Vec::new();
        let mut dim = 0usize;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with('n') {
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != 4 {
                return Err(Error::Parse {
                    line: lineno + 1,
                    msg: format!("expected 4 columns, got {}", parts.len()),
                });
            }
            let n: usize = parts[0].trim().parse().map_err(|e| Error::Parse {
                line: lineno + 1,
                msg: format!("bad index: {e}"),
            })?;
            let m: usize = parts[1].trim().parse().map_err(|e| Error::Parse {
                line: lineno + 1,
                msg: format!("bad index: {e}"),
            })?;
            let re = parse_f64(parts[2], lineno + 1)?;
            let im = parse_f64(parts[3], lineno + 1)?;
            dim = dim.max(n + 1).max(m + 1);
            entries.push((n, m, C64::new(re, im)));
        }
        let mut rho = DMatrix::<C64>::zeros(dim, dim);
        for (n, m, v) in entries {
            rho[(n, m)] = v;
        }
        DensityMatrix::new(rho)
    }
}

/// Wigner function of a density matrix via the displaced-parity expansion
/// W(β) = (2/π) tr[D(β) Π D(−β) ρ], evaluated per Fock pair with associated
/// Laguerre polynomials. β = (x + i p)/√2 on the supplied axes.
///
/// Fails (coarse-grid error) when either axis has fewer than 8 points per
/// unit quadrature.
pub fn wigner_from_density_matrix(
    rho: &DensityMatrix,
    x_axis: &[f64],
    p_axis: &[f64],
) -> Result<WignerGrid> {
    for axis in [x_axis, p_axis] {
        if axis.len() < 2 {
            return Err(Error::validation("Wigner axis needs at least 2 points"));
        }
        let dx = axis[1] - axis[0];
        if dx > 0.125 + 1e-12 {
            return Err(Error::validation(format!(
                "grid too coarse: spacing {dx:.4} exceeds 1/8 quadrature unit"
            )));
        }
    }
    let nmax = rho.n_max;
    let nx = x_axis.len();
    let rows: Vec<Vec<f64>> = p_axis
        .par_iter()
        .map(|&p| {
            let mut row = Vec::with_capacity(nx);
            for &x in x_axis {
                let beta = C64::new(x, p) / std::f64::consts::SQRT_2;
                row.push(wigner_point(rho, beta, nmax));
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

fn wigner_point(rho: &DensityMatrix, beta: C64, nmax: usize) -> f64 {
    let gamma = 2.0 * beta;
    let x4 = gamma.norm_sqr();
    let ln_gamma_abs = if x4 > 0.0 { gamma.norm().ln() } else { 0.0 };
    let phase = if x4 > 0.0 {
        gamma / gamma.norm()
    } else {
        C64::new(1.0, 0.0)
    };
    let mut acc = C64::new(0.0, 0.0);
    let mut laguerre = vec![0.0_f64; nmax + 1];
    for k in 0..=nmax {
        if x4 == 0.0 && k > 0 {
            break;
        }
        // associated Laguerre L_n^{(k)}(x4) by upward recurrence in n
        laguerre[0] = 1.0;
        if nmax >= k + 1 {
            laguerre[1] = 1.0 + k as f64 - x4;
        }
        for n in 1..nmax.saturating_sub(k) {
            let nf = n as f64;
            laguerre[n + 1] = ((2.0 * nf + k as f64 + 1.0 - x4) * laguerre[n]
                - (nf + k as f64) * laguerre[n - 1])
                / (nf + 1.0);
        }
        let phase_k = phase.powu(k as u32);
        for n in 0..=(nmax - k) {
            let m = n + k;
            let ln_mag =
                0.5 * (ln_factorial(n) - ln_factorial(m)) + k as f64 * ln_gamma_abs - 0.5 * x4;
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            let w_nm = sign * ln_mag.exp() * laguerre[n];
            let term = phase_k * w_nm;
            acc += rho.rho[(n, m)] * term;
            if k > 0 {
                acc += rho.rho[(m, n)] * term.conj();
            }
        }
    }
    // Hermitian rho makes the sum real; residual is numerical noise.
    debug_assert!(acc.im.abs() < 1e-9, "Wigner imaginary residue {}", acc.im);
    2.0 / std::f64::consts::PI * acc.re
}
