//! Strong-field-approximation engine: semiclassical action, saddle-point
//! solutions of the three-step recollision equations, bound–continuum dipole
//! matrix elements, and synthesis or ingestion of the time-dependent dipole
//! expectation d_H(t).

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{classical_field, Envelope, LaserParams};
use crate::numerics;

/// Regularization of the (t − t′)^{−3/2} momentum-saddle prefactor (a.u.).
const SADDLE_EPSILON: f64 = 1e-4;
/// Target residual for saddle solutions; the documented guarantee is 1e−10.
const SADDLE_TOL: f64 = 1e-12;
/// Minimum time-grid resolution for dipole synthesis.
const MIN_POINTS_PER_CYCLE: f64 = 200.0;
/// Internal integration resolution for dipole synthesis.
const INTERNAL_POINTS_PER_CYCLE: f64 = 2000.0;

/// Uniformly sampled expectation value of the dipole operator (a.u.).
#[derive(Debug, Clone)]
pub struct DipoleSeries {
    pub t: Vec<f64>,
    pub d: Vec<f64>,
}

impl DipoleSeries {
    /// Validates equal lengths, a uniform grid (1e−12 relative), and finite
    /// samples.
    pub fn new(t: Vec<f64>, d: Vec<f64>) -> Result<Self> {
        if t.len() != d.len() {
            return Err(Error::validation(format!(
                "time/dipole length mismatch: {} vs {}",
                t.len(),
                d.len()
            )));
        }
        if t.len() < 2 {
            return Err(Error::validation("dipole series needs at least 2 samples"));
        }
        let dt = t[1] - t[0];
        if dt <= 0.0 {
            return Err(Error::validation("time grid must ascend"));
        }
        for k in 1..t.len() {
            let step = t[k] - t[k - 1];
            if ((step - dt) / dt).abs() > 1e-12 {
                return Err(Error::validation(format!(
                    "time grid not uniform at index {k}: step {step} vs {dt}"
                )));
            }
        }
        if !d.iter().all(|v| v.is_finite()) {
            return Err(Error::validation("dipole contains non-finite samples"));
        }
        Ok(DipoleSeries { t, d })
    }

    pub fn dt(&self) -> f64 {
        self.t[1] - self.t[0]
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Points per optical cycle of `omega_l` resolved by this grid.
    pub fn points_per_cycle(&self, omega_l: f64) -> f64 {
        2.0 * PI / omega_l / self.dt()
    }

    /// CSV with header `t_au,d_au`.
    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        use std::io::Write;
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "t_au,d_au")?;
        for (t, d) in self.t.iter().zip(&self.d) {
            writeln!(f, "{t:.17e},{d:.17e}")?;
        }
        Ok(())
    }
}

/// Hydrogenic 1s bound–continuum dipole matrix element along the
/// polarization axis, d(p) = i (2^{7/2}(2 I_p)^{5/4}/π) p/(p² + 2 I_p)³.
pub fn bound_continuum_dipole(p: f64, ip: f64) -> C64 {
    C64::new(0.0, dipole_radial(p, ip))
}

fn dipole_radial(p: f64, ip: f64) -> f64 {
    let kappa2 = 2.0 * ip;
    let norm = 2.0_f64.powf(3.5) * kappa2.powf(1.25) / PI;
    norm * p / (p * p + kappa2).powi(3)
}

/// Semiclassical action S(p, t, t′) = ½∫_{t′}^t [p − A(τ)/c]² dτ + I_p (t−t′).
///
/// Closed form for the flat envelope, adaptive quadrature on the real path
/// otherwise. Complex time deformation (for saddle solving) goes through the
/// flat-envelope closed form.
pub fn action(p: C64, t: f64, t_prime: f64, params: &LaserParams) -> Result<C64> {
    if !(p.re.is_finite() && p.im.is_finite() && t.is_finite() && t_prime.is_finite()) {
        return Err(Error::validation("non-finite action arguments"));
    }
    if t < t_prime {
        return Err(Error::validation("action requires t >= t_prime"));
    }
    match params.envelope {
        Envelope::Flat => Ok(action_flat(p, C64::from(t), C64::from(t_prime), params)),
        _ => {
            let f = |tau: f64| {
                let v = p - crate::field::a_over_c(tau, params);
                0.5 * v * v
            };
            let kinetic = numerics::adaptive_simpson(&f, t_prime, t, 1e-12);
            Ok(kinetic + params.ip * (t - t_prime))
        }
    }
}

/// Flat-envelope action, analytic in all three arguments.
fn action_flat(p: C64, t: C64, t_prime: C64, params: &LaserParams) -> C64 {
    let w = params.omega_l;
    let a0 = params.e0 / w;
    let dt = t - t_prime;
    // A/c = −A0 sin(ωτ)  ⇒  ∫A/c = (A0/ω)(cos ωt − cos ωt′)
    let int_a = a0 / w * ((w * t).cos() - (w * t_prime).cos());
    let int_a2 =
        a0 * a0 * (0.5 * dt - ((2.0 * w * t).sin() - (2.0 * w * t_prime).sin()) / (4.0 * w));
    0.5 * p * p * dt - p * int_a + 0.5 * int_a2 + params.ip * dt
}

/// One complex saddle of the three-step equations.
#[derive(Debug, Clone, Copy)]
pub struct SaddleSolution {
    /// Harmonic order the saddle was solved for.
    pub q: u32,
    /// Canonical momentum p_s (a.u.).
    pub p: C64,
    /// Ionization time t_i (a.u.).
    pub t_i: C64,
    /// Recombination time t_r (a.u.).
    pub t_r: C64,
    pub branch: Branch,
    /// True when qω_L exceeds the classical cutoff and the branches have
    /// merged into a complex-degenerate pair.
    pub post_cutoff: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Short,
    Long,
}

impl std::fmt::Display for Branch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Branch::Short => write!(f, "short"),
            Branch::Long => write!(f, "long"),
        }
    }
}

/// Residuals of the three saddle equations (ionization, return,
/// recombination) — the independent recheck used by tests and callers.
pub fn saddle_residuals(sol: &SaddleSolution, params: &LaserParams) -> [f64; 3] {
    let f = saddle_equations(sol.p, sol.t_i, sol.t_r, sol.q, params);
    [f[0].norm(), f[1].norm(), f[2].norm()]
}

fn a_over_c_flat(t: C64, params: &LaserParams) -> C64 {
    let w = params.omega_l;
    -(params.e0 / w) * (w * t).sin()
}

fn saddle_equations(p: C64, t_i: C64, t_r: C64, q: u32, params: &LaserParams) -> [C64; 3] {
    let w = params.omega_l;
    let a0 = params.e0 / w;
    let vi = p - a_over_c_flat(t_i, params);
    let vr = p - a_over_c_flat(t_r, params);
    let f1 = 0.5 * vi * vi + params.ip;
    let f2 = p * (t_r - t_i) - a0 / w * ((w * t_r).cos() - (w * t_i).cos());
    let f3 = 0.5 * vr * vr + params.ip - q as f64 * w;
    [f1, f2, f3]
}

/// Classical three-step trajectory: return time and return kinetic energy
/// for an electron born at `t_i` with zero velocity in the flat-envelope
/// field. `None` when no return happens within 1.5 cycles.
pub fn classical_return(t_i: f64, params: &LaserParams) -> Option<(f64, f64)> {
    let w = params.omega_l;
    let a0 = params.e0 / w;
    let p = -a0 * (w * t_i).sin();
    let excursion = |t: f64| p * (t - t_i) - a0 / w * ((w * t).cos() - (w * t_i).cos());
    let v = |t: f64| p + a0 * (w * t).sin();
    let t_max = t_i + 1.5 * params.cycle();
    let n = 4000;
    // ignore crossings inside the numerical noise floor right after birth
    // (X grows quadratically from 0, so its sign is garbage there)
    let x_floor = 1e-9 * a0 / w;
    let mut prev_t = t_i + 1e-9;
    let mut prev_x = excursion(prev_t);
    for k in 1..=n {
        let t = t_i + 1e-9 + (t_max - t_i) * k as f64 / n as f64;
        let x = excursion(t);
        if prev_x.abs() > x_floor && (x == 0.0 || x.signum() != prev_x.signum()) {
            let (mut lo, mut hi) = (prev_t, t);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if excursion(mid).signum() == excursion(lo).signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let t_r = 0.5 * (lo + hi);
            let ke = 0.5 * v(t_r) * v(t_r);
            return Some((t_r, ke));
        }
        prev_t = t;
        prev_x = x;
    }
    None
}

/// Classical cutoff of the recollision kinetic energy: scans ionization
/// phases over the half-cycle after the field crest and returns
/// (phase of maximum, KE_max), with KE_max ≈ 3.17 U_p.
pub fn classical_cutoff(params: &LaserParams) -> (f64, f64) {
    let w = params.omega_l;
    let n = 2000;
    let mut best = (0.0, 0.0);
    for k in 1..n {
        let phi = 0.5 * PI * k as f64 / n as f64;
        if let Some((_, ke)) = classical_return(phi / w, params) {
            if ke > best.1 {
                best = (phi, ke);
            }
        }
    }
    best
}

fn classical_phase_for_energy(
    params: &LaserParams,
    ke_target: f64,
    lo: f64,
    hi: f64,
) -> Option<f64> {
    let w = params.omega_l;
    let ke_at = |phi: f64| {
        classical_return(phi / w, params)
            .map(|(_, ke)| ke)
            .unwrap_or(0.0)
    };
    let (mut a, mut b) = (lo, hi);
    let fa = ke_at(a) - ke_target;
    let fb = ke_at(b) - ke_target;
    if fa.signum() == fb.signum() {
        return None;
    }
    for _ in 0..80 {
        let m = 0.5 * (a + b);
        if (ke_at(m) - ke_target).signum() == fa.signum() {
            a = m;
        } else {
            b = m;
        }
    }
    Some(0.5 * (a + b))
}

/// Solve the three-step saddle equations for harmonic order `q` with a
/// damped complex Newton iteration seeded from classical trajectories.
///
/// Returns the short/long pair for the canonical half-cycle after the field
/// crest; beyond the classical cutoff the two merged (complex-degenerate)
/// saddles are returned with `post_cutoff` set.
pub fn solve_saddle_points(q: u32, params: &LaserParams) -> Result<Vec<SaddleSolution>> {
    params.validate()?;
    let w = params.omega_l;
    if (q as f64) * w <= params.ip {
        return Err(Error::validation(format!(
            "saddle equations require q ω_L > I_p (q = {q}, qω = {:.4}, Ip = {:.4})",
            q as f64 * w,
            params.ip
        )));
    }
    let (phi_c, ke_max) = classical_cutoff(params);
    let ke_target = (q as f64 * w - params.ip).max(1e-6);
    let post_cutoff = ke_target > ke_max;

    // Keldysh-style imaginary ionization-time scale for seeding
    let gamma = w * (2.0 * params.ip).sqrt() / params.e0.max(1e-300);
    let im_seed = gamma.asinh() / w;

    let mut out = Vec::with_capacity(2);
    for branch in [Branch::Long, Branch::Short] {
        let phi_seed = if post_cutoff {
            phi_c
        } else {
            let window = match branch {
                Branch::Long => (1e-3, phi_c),
                Branch::Short => (phi_c, 0.5 * PI - 1e-3),
            };
            classical_phase_for_energy(params, ke_target, window.0, window.1).unwrap_or(phi_c)
        };
        let t_i_cl = phi_seed / w;
        let (t_r_cl, _) =
            classical_return(t_i_cl, params).unwrap_or((t_i_cl + 0.65 * params.cycle(), 0.0));
        let p_cl = -(params.e0 / w) * phi_seed.sin();

        // post-cutoff branches split by the sign of the recombination-time
        // perturbation; below cutoff the classical seeds separate them
        let tr_im = if post_cutoff {
            match branch {
                Branch::Short => 0.08 * params.cycle(),
                Branch::Long => -0.08 * params.cycle(),
            }
        } else {
            0.0
        };
        let mut solved = None;
        for scale in [1.0, 0.5, 1.5, 0.25] {
            let seed = (
                C64::from(p_cl),
                C64::new(t_i_cl, scale * im_seed),
                C64::new(t_r_cl, tr_im),
            );
            if let Some(sol) = newton_saddle(seed, q, params) {
                solved = Some(sol);
                break;
            }
        }
        let (p, t_i, t_r) = solved.ok_or_else(|| Error::NoConvergence {
            context: format!("saddle solve q={q} {branch} branch"),
            detail: format!("damped Newton did not reach {SADDLE_TOL:.0e} in 100 iterations"),
        })?;
        out.push(SaddleSolution {
            q,
            p,
            t_i,
            t_r,
            branch,
            post_cutoff,
        });
    }

    // canonicalize: shift both times by whole cycles so Re(t_i) ∈ [0, T)
    let cycle = params.cycle();
    for sol in &mut out {
        let shift = (sol.t_i.re / cycle).floor() * cycle;
        sol.t_i -= C64::from(shift);
        sol.t_r -= C64::from(shift);
    }
    // branch labels by excursion length
    if out[0].t_r.re - out[0].t_i.re < out[1].t_r.re - out[1].t_i.re {
        out[0].branch = Branch::Short;
        out[1].branch = Branch::Long;
    } else {
        out[0].branch = Branch::Long;
        out[1].branch = Branch::Short;
    }
    out.sort_by_key(|s| s.branch == Branch::Long);
    Ok(out)
}

fn newton_saddle(seed: (C64, C64, C64), q: u32, params: &LaserParams) -> Option<(C64, C64, C64)> {
    let w = params.omega_l;
    let a0 = params.e0 / w;
    let half_cycle = 0.5 * params.cycle();
    let (mut p, mut ti, mut tr) = seed;
    let mut f = saddle_equations(p, ti, tr, q, params);
    let mut fnorm = f.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();

    for _ in 0..100 {
        if fnorm < SADDLE_TOL {
            return Some((p, ti, tr));
        }
        let vi = p - a_over_c_flat(ti, params);
        let vr = p - a_over_c_flat(tr, params);
        let dadt_i = a0 * w * (w * ti).cos();
        let dadt_r = a0 * w * (w * tr).cos();
        #[rustfmt::skip]
        let jac = nalgebra::Matrix3::new(
            vi,      vi * dadt_i, C64::from(0.0),
            tr - ti, -vi,         vr,
            vr,      C64::from(0.0), vr * dadt_r,
        );
        let rhs = nalgebra::Vector3::new(-f[0], -f[1], -f[2]);
        let step = jac.lu().solve(&rhs)?;
        let mut dp = step[0];
        let mut dti = step[1];
        let mut dtr = step[2];
        // clip time steps to half a cycle
        let clip = dti.norm().max(dtr.norm());
        if clip > half_cycle {
            let s = half_cycle / clip;
            dp *= s;
            dti *= s;
            dtr *= s;
        }
        // backtracking damping
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..10 {
            let (pn, tin, trn) = (p + lambda * dp, ti + lambda * dti, tr + lambda * dtr);
            let fn_ = saddle_equations(pn, tin, trn, q, params);
            let nn = fn_.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            if nn < fnorm {
                p = pn;
                ti = tin;
                tr = trn;
                f = fn_;
                fnorm = nn;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            return None;
        }
    }
    (fnorm < SADDLE_TOL).then_some((p, ti, tr))
}

/// Export saddle solutions with complex parts split into `_re`,`_im` columns.
pub fn write_saddles_csv(path: &std::path::Path, saddles: &[SaddleSolution]) -> Result<()> {
    use std::io::Write;
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "q,branch,post_cutoff,p_re,p_im,ti_re,ti_im,tr_re,tr_im")?;
    for s in saddles {
        writeln!(
            f,
            "{},{},{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
            s.q, s.branch, s.post_cutoff, s.p.re, s.p.im, s.t_i.re, s.t_i.im, s.t_r.re, s.t_r.im
        )?;
    }
    Ok(())
}

/// Synthesize d_H(t) on `t_grid` from the SFA integral: analytic Gaussian
/// saddle over the intermediate momentum, numeric integral over the
/// ionization time with a regularized (t−t′)^{−3/2} prefactor, ionization
/// excursions truncated at one cycle.
///
/// The t′ integration runs on an internal grid of ≥ 2000 points/cycle that
/// contains the output grid, so refining the output grid re-reads the same
/// converged integral.
pub fn sfa_dipole_series(params: &LaserParams, t_grid: &[f64]) -> Result<DipoleSeries> {
    params.validate()?;
    if t_grid.len() < 2 {
        return Err(Error::validation("t_grid needs at least 2 samples"));
    }
    let dt_out = t_grid[1] - t_grid[0];
    let cycle = params.cycle();
    let ppc = cycle / dt_out;
    if ppc < MIN_POINTS_PER_CYCLE - 1e-9 {
        return Err(Error::validation(format!(
            "under-resolved grid: {ppc:.1} points/cycle < {MIN_POINTS_PER_CYCLE}"
        )));
    }
    if params.e0 == 0.0 {
        return DipoleSeries::new(t_grid.to_vec(), vec![0.0; t_grid.len()]);
    }

    let refine = ((INTERNAL_POINTS_PER_CYCLE / ppc).ceil() as usize).max(1);
    let h = dt_out / refine as f64;
    let t0 = t_grid[0];
    let n_int = (t_grid.len() - 1) * refine + 1;
    let horizon = (cycle / h).round() as usize; // one-cycle trajectory horizon

    // cumulative kinematic integrals on the internal grid
    let e_field: Vec<f64> = (0..n_int)
        .map(|i| classical_field(t0 + i as f64 * h, params))
        .collect();
    let aoc: Vec<f64> = {
        let mut a = numerics::cumulative_trapezoid(&e_field, h);
        let offset = crate::field::a_over_c(t0, params);
        for v in &mut a {
            *v = offset - *v;
        }
        a
    };
    let cum_a = numerics::cumulative_trapezoid(&aoc, h);
    let aoc2: Vec<f64> = aoc.iter().map(|v| v * v).collect();
    let cum_a2 = numerics::cumulative_trapezoid(&aoc2, h);

    let kappa2 = 2.0 * params.ip;
    let dnorm2 = 2.0_f64.powi(7) * kappa2.powf(2.5) / (PI * PI);
    let ip = params.ip;

    let d_out: Vec<f64> = (0..t_grid.len())
        .into_par_iter()
        .map(|k| {
            let i = k * refine;
            let j_min = i.saturating_sub(horizon);
            if i == j_min {
                return 0.0;
            }
            let mut acc = C64::new(0.0, 0.0);
            for j in j_min..=i {
                let tau = (i - j) as f64 * h;
                let e_tp = e_field[j];
                if e_tp == 0.0 && tau > 0.0 {
                    continue;
                }
                let (p_st, s) = if tau == 0.0 {
                    (aoc[i], 0.0)
                } else {
                    let int_a = cum_a[i] - cum_a[j];
                    let int_a2 = cum_a2[i] - cum_a2[j];
                    let p_st = int_a / tau;
                    let s = 0.5 * p_st * p_st * tau - p_st * int_a + 0.5 * int_a2 + ip * tau;
                    (p_st, s)
                };
                let va = p_st - aoc[i];
                let vb = p_st - aoc[j];
                let dd =
                    dnorm2 * va * vb / ((va * va + kappa2).powi(3) * (vb * vb + kappa2).powi(3));
                let pref = (PI / C64::new(SADDLE_EPSILON, 0.5 * tau)).powf(1.5);
                let weight = if j == j_min || j == i { 0.5 } else { 1.0 };
                acc += weight * pref * dd * e_tp * C64::new(s.cos(), -s.sin());
            }
            acc *= h;
            // d = i (integral) + c.c.
            2.0 * (C64::i() * acc).re
        })
        .collect();

    DipoleSeries::new(t_grid.to_vec(), d_out)
}

/// Uniform time grid covering the pulse support at `points_per_cycle` ≥ 200.
pub fn dipole_time_grid(params: &LaserParams, points_per_cycle: usize) -> Result<Vec<f64>> {
    if (points_per_cycle as f64) < MIN_POINTS_PER_CYCLE {
        return Err(Error::validation(format!(
            "points_per_cycle must be >= {MIN_POINTS_PER_CYCLE}"
        )));
    }
    let (a, b) = params
        .support()
        .unwrap_or((0.0, params.n_cycles.max(1.0) * params.cycle()));
    let dt = params.cycle() / points_per_cycle as f64;
    let n = ((b - a) / dt).round() as usize + 1;
    Ok((0..n).map(|i| a + i as f64 * dt).collect())
}

/// Load a two-column dipole file (optionally headed `t_au,d_au`);
/// non-uniform grids are resampled onto a uniform grid by natural cubic
/// interpolation.
pub fn load_dipole_series(path: &std::path::Path) -> Result<DipoleSeries> {
    let text = std::fs::read_to_string(path)?;
    let mut t = Vec::new();
    let mut d = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if lineno == 0 && line.chars().next().is_some_and(|c| c.is_alphabetic()) {
            continue; // header row
        }
        let mut parts = line.split(',');
        let (a, b) = match (parts.next(), parts.next()) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                return Err(Error::Parse {
                    line: lineno + 1,
                    msg: "expected two comma-separated columns".into(),
                })
            }
        };
        if parts.next().is_some() {
            return Err(Error::Parse {
                line: lineno + 1,
                msg: "expected exactly two columns".into(),
            });
        }
        let tv = a.trim().parse::<f64>().map_err(|e| Error::Parse {
            line: lineno + 1,
            msg: format!("bad time value {a:?}: {e}"),
        })?;
        let dv = b.trim().parse::<f64>().map_err(|e| Error::Parse {
            line: lineno + 1,
            msg: format!("bad dipole value {b:?}: {e}"),
        })?;
        if let Some(&last) = t.last() {
            if tv <= last {
                return Err(Error::Parse {
                    line: lineno + 1,
                    msg: format!("time column not strictly increasing ({last} -> {tv})"),
                });
            }
        }
        t.push(tv);
        d.push(dv);
    }
    if t.len() < 2 {
        return Err(Error::Parse {
            line: 1,
            msg: "dipole file needs at least 2 samples".into(),
        });
    }
    let dt = t[1] - t[0];
    let uniform = t.windows(2).all(|w| ((w[1] - w[0] - dt) / dt).abs() <= 1e-12);
    if uniform {
        return DipoleSeries::new(t, d);
    }
    let n = t.len();
    let t_uniform: Vec<f64> = (0..n)
        .map(|i| t[0] + (t[n - 1] - t[0]) * i as f64 / (n as f64 - 1.0))
        .collect();
    let d_uniform = cubic_interpolate(&t, &d, &t_uniform);
    DipoleSeries::new(t_uniform, d_uniform)
}

/// Natural cubic-spline interpolation of (xs, ys) at query points `qs`.
fn cubic_interpolate(xs: &[f64], ys: &[f64], qs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut m = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    let mut upper = vec![0.0; n];
    diag[0] = 1.0;
    diag[n - 1] = 1.0;
    for i in 1..n - 1 {
        let h0 = xs[i] - xs[i - 1];
        let h1 = xs[i + 1] - xs[i];
        diag[i] = 2.0 * (h0 + h1);
        upper[i] = h1;
        rhs[i] = 6.0 * ((ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0);
    }
    for i in 1..n - 1 {
        let h0 = xs[i] - xs[i - 1];
        let factor = h0 / diag[i - 1];
        diag[i] -= factor * upper[i - 1];
        rhs[i] -= factor * rhs[i - 1];
    }
    for i in (1..n - 1).rev() {
        m[i] = (rhs[i] - upper[i] * m[i + 1]) / diag[i];
    }
    qs.iter()
        .map(|&q| {
            let k = match xs.binary_search_by(|v| v.partial_cmp(&q).unwrap()) {
                Ok(k) => k.min(n - 2),
                Err(k) => k.clamp(1, n - 1) - 1,
            };
            let h = xs[k + 1] - xs[k];
            let a = (xs[k + 1] - q) / h;
            let b = (q - xs[k]) / h;
            a * ys[k]
                + b * ys[k + 1]
                + ((a * a * a - a) * m[k] + (b * b * b - b) * m[k + 1]) * h * h / 6.0
        })
        .collect()
}
