//! ATI-conditioned field states: the discretized single-ionization coherent
//! superposition with its half-cycle Gaussian algebra, and the constant-shift
//! Wigner function of the total-ATI density matrix.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{envelope, LaserParams};
use crate::numerics::adaptive_simpson;
use crate::quantum::{grid_spans_centers, WignerGrid};

/// Shift-per-half-cycle bound: two consecutive coherent states must keep an
/// overlap above 1 − e^{−1}, i.e. |Δ| < 0.95.
pub const DELTA_BOUND: f64 = 0.95;

/// Configuration of a single-ionization ATI state
/// |Φ̃⟩ = i Σ_j (A_j â − B_j â†)|(j+1)Δ⟩.
#[derive(Debug, Clone)]
pub struct AtiSingleConfig {
    /// Number of equal-intensity half-cycles 𝒩.
    pub n_halfcycles: usize,
    /// Per-half-cycle coherent shift Δ.
    pub delta: C64,
    /// Outgoing kinetic momentum of the conditioning electron (a.u.).
    pub v: f64,
    /// Per-half-cycle pairs (A_j, B_j).
    pub coeffs: Vec<(C64, C64)>,
}

impl AtiSingleConfig {
    pub fn new(n_halfcycles: usize, delta: C64, v: f64, coeffs: Vec<(C64, C64)>) -> Result<Self> {
        if n_halfcycles < 1 {
            return Err(Error::validation("need at least one half-cycle"));
        }
        if delta.norm() >= DELTA_BOUND {
            return Err(Error::constraint(format!(
                "|Delta| = {:.3} >= {DELTA_BOUND}: consecutive coherent states would overlap below 1 - 1/e",
                delta.norm()
            )));
        }
        if coeffs.len() != n_halfcycles {
            return Err(Error::validation(format!(
                "got {} coefficient pairs for {} half-cycles",
                coeffs.len(),
                n_halfcycles
            )));
        }
        if !coeffs
            .iter()
            .all(|(a, b)| a.is_finite() && b.is_finite())
        {
            return Err(Error::validation("non-finite half-cycle coefficients"));
        }
        Ok(AtiSingleConfig {
            n_halfcycles,
            delta,
            v,
            coeffs,
        })
    }

    /// Build the configuration from laser parameters, computing the
    /// (A_j, B_j) integrals over each half-cycle window.
    pub fn from_params(
        n_halfcycles: usize,
        delta: C64,
        v: f64,
        params: &LaserParams,
    ) -> Result<Self> {
        let coeffs = (0..n_halfcycles)
            .map(|j| halfcycle_coeffs(j, v, params).map(|c| (c.a, c.b)))
            .collect::<Result<Vec<_>>>()?;
        AtiSingleConfig::new(n_halfcycles, delta, v, coeffs)
    }

    /// Coherent centers (j+1)Δ of the superposition.
    pub fn centers(&self) -> Vec<C64> {
        (0..self.n_halfcycles)
            .map(|j| (j as f64 + 1.0) * self.delta)
            .collect()
    }
}

/// Configuration of the total-ATI constant-shift Wigner function.
#[derive(Debug, Clone)]
pub struct AtiTotalConfig {
    /// Constant coherent shift δα.
    pub delta_alpha: C64,
    /// Complex weights standing in for the four two-time dipole-correlator
    /// integrals (W1, W2, W3, W4); all equal by default.
    pub weights: [C64; 4],
}

impl AtiTotalConfig {
    pub fn new(delta_alpha: C64, weights: [C64; 4]) -> Result<Self> {
        if !delta_alpha.is_finite() || !weights.iter().all(|w| w.is_finite()) {
            return Err(Error::validation("non-finite total-ATI configuration"));
        }
        Ok(AtiTotalConfig {
            delta_alpha,
            weights,
        })
    }

    pub fn equal_weights(delta_alpha: C64) -> Result<Self> {
        AtiTotalConfig::new(delta_alpha, [C64::new(1.0, 0.0); 4])
    }
}

/// Direct-ionization ATI dipole matrix element
/// d*_H(v, t) = d*(p − A(t)/c) e^{−i(S(p,t,t₀) − I_p t)}, with the electron
/// born at the field maximum t₀ with zero kinetic energy, p = v + A(t₀)/c.
///
/// Valid for direct electrons only: kinetic energies above 2 U_p belong to
/// the rescattering channel and are rejected.
pub fn ati_direct_dipole(v: f64, t: f64, params: &LaserParams) -> Result<C64> {
    params.validate()?;
    let up = params.up();
    if 0.5 * v * v > 2.0 * up + 1e-15 {
        return Err(Error::constraint(format!(
            "kinetic energy {:.4} a.u. above the direct-ionization window 2 U_p = {:.4}",
            0.5 * v * v,
            2.0 * up
        )));
    }
    let t0 = params.center();
    let p = v + crate::field::a_over_c(t0, params);
    let kinematic = p - crate::field::a_over_c(t, params);
    let d_star = crate::sfa::bound_continuum_dipole(kinematic, params.ip).conj();
    let s = crate::sfa::action(C64::from(p), t.max(t0), t.min(t0), params)?;
    // S(p, t, t0) is antisymmetric under swapping the endpoints
    let s = if t >= t0 { s } else { -s };
    let phase = -C64::i() * (s - params.ip * t);
    Ok(d_star * phase.exp())
}

/// Half-cycle projection coefficients of the ATI dipole.
#[derive(Debug, Clone, Copy)]
pub struct HalfcycleCoeffs {
    /// A_j = g ∫ d*_H(v,t) e^{iωt} dt over [t_j, t_{j+1}].
    pub a: C64,
    /// B_j = g ∫ d*_H(v,t) e^{−iωt} dt over the same window.
    pub b: C64,
    /// C_j^± = (A_j ± B_j)/√2.
    pub c_plus: C64,
    pub c_minus: C64,
}

/// Integrate the ATI dipole against e^{±iωt} over half-cycle j, with windows
/// t_j = t₀ + j π/ω counted from the field maximum.
///
/// The discretized superposition assumes equal absorption per half-cycle, so
/// the envelope must be flat over the window.
pub fn halfcycle_coeffs(j: usize, v: f64, params: &LaserParams) -> Result<HalfcycleCoeffs> {
    params.validate()?;
    let w = params.omega_l;
    let t0 = params.center();
    let t_a = t0 + j as f64 * PI / w;
    let t_b = t0 + (j as f64 + 1.0) * PI / w;
    for k in 0..=16 {
        let t = t_a + (t_b - t_a) * k as f64 / 16.0;
        if (envelope(t, params) - 1.0).abs() > 1e-9 {
            return Err(Error::validation(format!(
                "envelope is not flat over half-cycle {j} (f({t:.2}) = {:.6})",
                envelope(t, params)
            )));
        }
    }
    let fa = |t: f64| -> C64 {
        ati_direct_dipole(v, t, params).unwrap_or(C64::new(0.0, 0.0)) * (C64::i() * w * t).exp()
    };
    let fb = |t: f64| -> C64 {
        ati_direct_dipole(v, t, params).unwrap_or(C64::new(0.0, 0.0)) * (-C64::i() * w * t).exp()
    };
    let a = params.g * adaptive_simpson(&fa, t_a, t_b, 1e-13);
    let b = params.g * adaptive_simpson(&fb, t_a, t_b, 1e-13);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    Ok(HalfcycleCoeffs {
        a,
        b,
        c_plus: s * (a + b),
        c_minus: s * (a - b),
    })
}

/// Gaussian moments ∫ y^m e^{−y² + By} dy for m = 0, 1, 2, divided by √π:
/// (e^{B²/4}, (B/2) e^{B²/4}, (B²/4 + 1/2) e^{B²/4}).
fn gaussian_moments(b: C64) -> (C64, C64, C64) {
    let e = (b * b / 4.0).exp();
    (e, 0.5 * b * e, (b * b / 4.0 + 0.5) * e)
}

/// Matrix element of one coherent-pair term integrated over y in closed form:
/// the (j, k) contribution to ∫⟨x+y|ρ|x−y⟩e^{−2ipy}dy with ket center c_j,
/// bra center c_k, and the supplied degree-1 y-polynomials in ket/bra.
struct PairGeometry {
    /// e^{C + B²/4}, the shared Gaussian factor.
    prefactor: C64,
    /// f_j = −(x − a_j) + i b_j (ket derivative factor).
    f_ket: C64,
    /// f̄'_k = −(x − a_k) − i b_k (bra derivative factor).
    f_bra: C64,
    m0: C64,
    m1: C64,
    m2: C64,
}

fn pair_geometry(c_j: C64, c_k: C64, x: f64, p: f64) -> PairGeometry {
    let s2 = std::f64::consts::SQRT_2;
    let (a_j, b_j) = (s2 * c_j.re, s2 * c_j.im);
    let (a_k, b_k) = (s2 * c_k.re, s2 * c_k.im);
    let b = C64::new(a_j - a_k, b_j + b_k - 2.0 * p);
    // the −i Re c Im c phase of ⟨x|c⟩ survives in cross terms (j ≠ k)
    let c = C64::new(
        -0.5 * (x - a_j) * (x - a_j) - 0.5 * (x - a_k) * (x - a_k),
        x * (b_j - b_k) - c_j.re * c_j.im + c_k.re * c_k.im,
    );
    let (m0, m1, m2) = gaussian_moments(b);
    PairGeometry {
        prefactor: c.exp(),
        f_ket: C64::new(-(x - a_j), b_j),
        f_bra: C64::new(-(x - a_k), -b_k),
        m0,
        m1,
        m2,
    }
}

/// Wigner function of the single-ionization ATI state. Every (j, k) term is
/// a Gaussian times a degree-≤2 polynomial in y, integrated in closed form;
/// the grid is renormalized to unit integral after asserting the imaginary
/// residue is below 1e−10 of the grid scale.
pub fn ati_single_wigner(
    config: &AtiSingleConfig,
    x_axis: &[f64],
    p_axis: &[f64],
) -> Result<WignerGrid> {
    if config.delta.norm() >= DELTA_BOUND {
        return Err(Error::constraint(format!(
            "|Delta| = {:.3} >= {DELTA_BOUND}",
            config.delta.norm()
        )));
    }
    let centers = config.centers();
    grid_spans_centers(x_axis, p_axis, &centers)?;

    let nx = x_axis.len();
    let rows: Vec<Vec<C64>> = p_axis
        .par_iter()
        .map(|&p| {
            let mut row = Vec::with_capacity(nx);
            for &x in x_axis {
                let mut acc = C64::new(0.0, 0.0);
                for (j, &(a_j, b_j)) in config.coeffs.iter().enumerate() {
                    let s = std::f64::consts::FRAC_1_SQRT_2;
                    let (cm_j, cp_j) = (s * (a_j - b_j), s * (a_j + b_j));
                    for (k, &(a_k, b_k)) in config.coeffs.iter().enumerate() {
                        let (cm_k, cp_k) = (s * (a_k - b_k), s * (a_k + b_k));
                        let geo = pair_geometry(centers[j], centers[k], x, p);
                        let alpha0 = cm_j * x + cp_j * geo.f_ket;
                        let alpha1 = cm_j - cp_j;
                        let beta0 = cm_k.conj() * x + cp_k.conj() * geo.f_bra;
                        let beta1 = cp_k.conj() - cm_k.conj();
                        acc += geo.prefactor
                            * (alpha0 * beta0 * geo.m0
                                + (alpha0 * beta1 + alpha1 * beta0) * geo.m1
                                + alpha1 * beta1 * geo.m2);
                    }
                }
                row.push(acc / PI);
            }
            row
        })
        .collect();

    finalize_wigner(rows, x_axis, p_axis, "single-ionization ATI")
}

/// Total-ATI Wigner function with the four two-time integrals replaced by
/// configurable weights: W ∝ w1 W1 + w2 W2 − i w3 W3 + i w4 W4, evaluated in
/// closed form around the constant shift δα and renormalized.
pub fn ati_total_wigner(
    config: &AtiTotalConfig,
    x_axis: &[f64],
    p_axis: &[f64],
) -> Result<WignerGrid> {
    if config.weights.iter().all(|w| w.norm() == 0.0) {
        return Err(Error::validation(
            "degenerate weights: all four time-integral weights are zero",
        ));
    }
    grid_spans_centers(x_axis, p_axis, &[config.delta_alpha])?;
    let [w1, w2, w3, w4] = config.weights;
    let da = config.delta_alpha;

    let nx = x_axis.len();
    let rows: Vec<Vec<C64>> = p_axis
        .par_iter()
        .map(|&p| {
            let mut row = Vec::with_capacity(nx);
            for &x in x_axis {
                let geo = pair_geometry(da, da, x, p);
                let f = geo.f_ket;
                let fb = geo.f_bra;
                // W1: (x+y)(x−y) = x² − y²
                let t1 = x * x * geo.m0 - geo.m2;
                // W2: (f − y)(f̄' + y)
                let t2 = f * fb * geo.m0 + (f - fb) * geo.m1 - geo.m2;
                // W3: (x+y)(f̄' + y)
                let t3 = x * fb * geo.m0 + (x + fb) * geo.m1 + geo.m2;
                // W4: (x−y)(f − y)
                let t4 = x * f * geo.m0 - (x + f) * geo.m1 + geo.m2;
                let combined = w1 * t1 + w2 * t2 - C64::i() * w3 * t3 + C64::i() * w4 * t4;
                row.push(geo.prefactor * combined * (2.0 / (PI * PI)));
            }
            row
        })
        .collect();

    finalize_wigner(rows, x_axis, p_axis, "total ATI")
}

fn finalize_wigner(
    rows: Vec<Vec<C64>>,
    x_axis: &[f64],
    p_axis: &[f64],
    what: &str,
) -> Result<WignerGrid> {
    let scale = rows
        .iter()
        .flatten()
        .map(|v| v.re.abs())
        .fold(0.0_f64, f64::max);
    if scale == 0.0 {
        return Err(Error::validation(format!("{what} Wigner grid is identically zero")));
    }
    let max_imag = rows
        .iter()
        .flatten()
        .map(|v| v.im.abs())
        .fold(0.0_f64, f64::max);
    if max_imag > 1e-10 * scale {
        return Err(Error::Constraint(format!(
            "{what} Wigner grid has imaginary residue {max_imag:.3e} (scale {scale:.3e})"
        )));
    }
    let mut values = Vec::with_capacity(x_axis.len() * p_axis.len());
    for row in rows {
        values.extend(row.into_iter().map(|v| v.re));
    }
    let grid = WignerGrid::new(x_axis.to_vec(), p_axis.to_vec(), values)?;
    let total = crate::quantum::integrate_wigner(&grid);
    if total.abs() < 1e-12 {
        return Err(Error::validation(format!(
            "{what} Wigner grid integrates to zero; cannot normalize"
        )));
    }
    let mut values = grid.values;
    for v in &mut values {
        *v /= total;
    }
    WignerGrid::new(grid.x_axis, grid.p_axis, values)
}
