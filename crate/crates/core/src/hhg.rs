//! HHG quantum optics: the coherent shift δα(t) of the driving mode, the
//! harmonic amplitudes β_q(t), spectra and photon statistics, conditioning on
//! harmonic generation, and the analytic cat/kitten states it produces.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::field::{envelope, LaserParams};
use crate::numerics;
use crate::quantum::{
    coherent_fock_coefficient, coherent_overlap, ln_factorial, WignerGrid,
};
use crate::sfa::DipoleSeries;

/// Coherent trajectories of the driving and harmonic modes.
#[derive(Debug, Clone)]
pub struct ShiftTrace {
    pub t: Vec<f64>,
    /// δα_L(t), starting at zero.
    pub delta_alpha: Vec<C64>,
    /// β_q(t) for q = 2 up to the cutoff order.
    pub beta_q: BTreeMap<u32, Vec<C64>>,
    /// |α_L + δα_L|(t).
    pub amplitude: Vec<f64>,
    /// Phase θ(t) from (α_L + δα_L) = |α_L + δα_L| e^{−iθ}.
    pub theta: Vec<f64>,
    /// Initial coherent amplitude the trace was built against.
    pub alpha_l: C64,
}

impl ShiftTrace {
    pub fn dt(&self) -> f64 {
        self.t[1] - self.t[0]
    }

    /// CSV with header `t_au,dalpha_re,dalpha_im,amp,theta`.
    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        use std::io::Write;
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "t_au,dalpha_re,dalpha_im,amp,theta")?;
        for k in 0..self.t.len() {
            writeln!(
                f,
                "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                self.t[k],
                self.delta_alpha[k].re,
                self.delta_alpha[k].im,
                self.amplitude[k],
                self.theta[k]
            )?;
        }
        Ok(())
    }
}

/// Cutoff harmonic order (I_p + 3.17 U_p)/ω_L, floored at 3.
pub fn cutoff_order(params: &LaserParams) -> u32 {
    let q = ((params.ip + 3.17 * params.up()) / params.omega_l).ceil() as u32;
    q.max(3).min(199)
}

/// Integrate the coherent shift of the fundamental mode and the harmonic-mode
/// amplitudes:
/// δα(t) = N g ∫ f(τ) d_H(τ) e^{iω_L τ} dτ,
/// β_q(t) = N √q g ∫ f(τ) d_H(τ) e^{i q ω_L τ} dτ (cumulative trapezoids).
pub fn coherent_shift_trace(dipole: &DipoleSeries, params: &LaserParams) -> Result<ShiftTrace> {
    params.validate()?;
    let ppc = dipole.points_per_cycle(params.omega_l);
    if ppc < 200.0 - 1e-9 {
        return Err(Error::validation(format!(
            "dipole grid resolves {ppc:.1} points/cycle, need >= 200"
        )));
    }
    if let Some((a, b)) = params.support() {
        let (t0, t1) = (dipole.t[0], *dipole.t.last().unwrap());
        if t1 < a || t0 > b {
            return Err(Error::GridMismatch(format!(
                "dipole grid [{t0:.2}, {t1:.2}] does not overlap pulse support [{a:.2}, {b:.2}]"
            )));
        }
    }

    let n = dipole.len();
    let dt = dipole.dt();
    let ng = params.n_atoms as f64 * params.g;
    let w = params.omega_l;

    let fd: Vec<f64> = dipole
        .t
        .iter()
        .zip(&dipole.d)
        .map(|(&t, &d)| envelope(t, params) * d)
        .collect();

    let integrate_at = |q: u32| -> Vec<C64> {
        let integrand: Vec<C64> = dipole
            .t
            .iter()
            .zip(&fd)
            .map(|(&t, &v)| v * (C64::i() * (q as f64) * w * t).exp())
            .collect();
        numerics::cumulative_trapezoid_complex(&integrand, dt)
    };

    let delta_alpha: Vec<C64> = integrate_at(1).into_iter().map(|v| ng * v).collect();
    let mut beta_q = BTreeMap::new();
    for q in 2..=cutoff_order(params) {
        let scale = ng * (q as f64).sqrt();
        let trace: Vec<C64> = integrate_at(q).into_iter().map(|v| scale * v).collect();
        beta_q.insert(q, trace);
    }

    let mut amplitude = Vec::with_capacity(n);
    let mut theta = Vec::with_capacity(n);
    for da in &delta_alpha {
        let total = params.alpha_l + da;
        amplitude.push(total.norm());
        theta.push(-total.arg());
    }

    Ok(ShiftTrace {
        t: dipole.t.clone(),
        delta_alpha,
        beta_q,
        amplitude,
        theta,
        alpha_l: params.alpha_l,
    })
}

/// Emitted photon number in harmonic mode q, n_q = |β_q(t_end)|².
pub fn harmonic_photon_number(q: u32, trace: &ShiftTrace) -> Result<f64> {
    let beta = trace
        .beta_q
        .get(&q)
        .ok_or_else(|| Error::validation(format!("harmonic order {q} not present in trace")))?;
    Ok(beta.last().map(|b| b.norm_sqr()).unwrap_or(0.0))
}

/// HHG spectrum ℰ(ω) ∝ N² ω⁴ |d̃(ω)|² with d̃ the Hann-windowed Fourier
/// transform of the dipole.
pub fn hhg_spectrum(
    dipole: &DipoleSeries,
    omega_grid: &[f64],
    params: &LaserParams,
) -> Result<Vec<(f64, f64)>> {
    if omega_grid.iter().any(|&w| w <= 0.0) {
        return Err(Error::validation("omega grid must be positive"));
    }
    let n = dipole.len();
    let dt = dipole.dt();
    let n2 = (params.n_atoms as f64).powi(2);
    let windowed: Vec<f64> = dipole
        .d
        .iter()
        .enumerate()
        .map(|(k, &d)| {
            let s = (PI * k as f64 / (n as f64 - 1.0)).sin();
            d * s * s
        })
        .collect();
    Ok(omega_grid
        .iter()
        .map(|&w| {
            let y: Vec<C64> = dipole
                .t
                .iter()
                .zip(&windowed)
                .map(|(&t, &d)| d * (C64::i() * w * t).exp())
                .collect();
            let ft = numerics::trapezoid_complex(&y, dt);
            (w, n2 * w.powi(4) * ft.norm_sqr())
        })
        .collect())
}

/// Mean quadratures of the driving mode along the trace:
/// ⟨x⟩ = √2 |α+δα| cos(ω_L t + θ), ⟨p⟩ = −√2 |α+δα| sin(ω_L t + θ).
pub fn quadrature_trace(trace: &ShiftTrace, params: &LaserParams) -> Vec<(f64, f64, f64)> {
    let w = params.omega_l;
    trace
        .t
        .iter()
        .zip(trace.amplitude.iter().zip(&trace.theta))
        .map(|(&t, (&amp, &th))| {
            let phase = w * t + th;
            (
                t,
                std::f64::consts::SQRT_2 * amp * phase.cos(),
                -std::f64::consts::SQRT_2 * amp * phase.sin(),
            )
        })
        .collect()
}

/// Poisson probability of n photons in the coherent shift |δα⟩.
pub fn photon_absorption_probability(delta_alpha: C64, n: usize) -> f64 {
    let lambda = delta_alpha.norm_sqr();
    if lambda == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    (-lambda + n as f64 * lambda.ln() - ln_factorial(n)).exp()
}

/// Time-averaged photon-absorption distribution over one field cycle.
#[derive(Debug, Clone)]
pub struct CycleAveragedAbsorption {
    /// P̃_n for n = 0..=n_max.
    pub p_tilde: Vec<f64>,
    /// Largest local maximum with n > 2, if any.
    pub n_cutoff: Option<usize>,
    /// Same peak refined by 3-point parabolic interpolation.
    pub n_cutoff_interp: Option<f64>,
}

/// Average P_n(t, t₀) over the cycle starting at `cycle_start`; the shift is
/// measured from the cycle start, δα(t, t₀) = δα(t) − δα(t₀).
pub fn cycle_averaged_absorption(
    trace: &ShiftTrace,
    cycle_start: f64,
    n_max: usize,
    params: &LaserParams,
) -> Result<CycleAveragedAbsorption> {
    let cycle = params.cycle();
    let t_first = trace.t[0];
    let t_last = *trace.t.last().unwrap();
    if cycle_start < t_first - 1e-9 || cycle_start + cycle > t_last + 1e-9 {
        return Err(Error::validation(format!(
            "cycle [{:.2}, {:.2}] not inside trace [{:.2}, {:.2}]",
            cycle_start,
            cycle_start + cycle,
            t_first,
            t_last
        )));
    }
    let dt = trace.dt();
    let k0 = ((cycle_start - t_first) / dt).round() as usize;
    let k1 = (((cycle_start + cycle) - t_first) / dt).round() as usize;
    let base = trace.delta_alpha[k0];
    let mut p_tilde = vec![0.0; n_max + 1];
    let mut count = 0usize;
    for k in k0..=k1.min(trace.t.len() - 1) {
        let da = trace.delta_alpha[k] - base;
        for (n, p) in p_tilde.iter_mut().enumerate() {
            *p += photon_absorption_probability(da, n);
        }
        count += 1;
    }
    for p in &mut p_tilde {
        *p /= count as f64;
    }
    let peaks = numerics::local_maxima(&p_tilde, 0.0, 1);
    let best = peaks
        .into_iter()
        .filter(|&n| n > 2)
        .max_by(|&a, &b| p_tilde[a].partial_cmp(&p_tilde[b]).unwrap());
    Ok(CycleAveragedAbsorption {
        n_cutoff: best,
        n_cutoff_interp: best.map(|n| numerics::parabolic_peak(&p_tilde, n)),
        p_tilde,
    })
}

/// Neutral-density attenuation: both amplitudes scaled by cos(r).
pub fn attenuate(alpha: C64, delta_alpha: C64, r: f64) -> Result<(C64, C64)> {
    if !(0.0..=0.5 * PI).contains(&r) {
        return Err(Error::validation(format!("r must lie in [0, π/2], got {r}")));
    }
    let c = r.cos();
    Ok((alpha * c, delta_alpha * c))
}

/// Parameters of the conditioned state |Φ⟩ = |α+δα⟩ − ⟨α|α+δα⟩|α⟩.
#[derive(Debug, Clone, Copy)]
pub struct CatStateParams {
    pub alpha: C64,
    pub delta_alpha: C64,
    /// Overlap ε = ⟨α|α+δα⟩.
    pub epsilon: C64,
    /// Norm √(1 − e^{−|δα|²}) of the unnormalized superposition.
    pub norm: f64,
}

impl CatStateParams {
    pub fn shifted(&self) -> C64 {
        self.alpha + self.delta_alpha
    }

    pub fn norm_sq(&self) -> f64 {
        self.norm * self.norm
    }

    /// ⟨n⟩ of the normalized conditioned state, closed form.
    pub fn mean_photon(&self) -> f64 {
        let a = self.shifted();
        let b = self.alpha;
        let e2 = (-self.delta_alpha.norm_sqr()).exp();
        (a.norm_sqr() + e2 * (b.norm_sqr() - 2.0 * (a.conj() * b).re)) / (1.0 - e2)
    }

    /// Unnormalized Fock coefficients of the superposition.
    pub fn fock_coefficients(&self, n_max: usize) -> Vec<C64> {
        (0..=n_max)
            .map(|n| {
                coherent_fock_coefficient(n, self.shifted())
                    - self.epsilon * coherent_fock_coefficient(n, self.alpha)
            })
            .collect()
    }
}

/// Projection onto "at least one harmonic photon": P̂ ≈ 1 − |α⟩⟨α| applied to
/// the shifted driving mode. Fails for δα = 0 (the projector annihilates the
/// state).
pub fn condition_on_hhg(alpha: C64, delta_alpha: C64) -> Result<CatStateParams> {
    if delta_alpha.norm() == 0.0 {
        return Err(Error::constraint(
            "delta_alpha = 0 conditions onto the null state".to_string(),
        ));
    }
    let epsilon = coherent_overlap(alpha, alpha + delta_alpha);
    // −expm1(−|δα|²) = 1 − e^{−|δα|²} without cancellation in the kitten limit
    let norm = (-(-delta_alpha.norm_sqr()).exp_m1()).sqrt();
    Ok(CatStateParams {
        alpha,
        delta_alpha,
        epsilon,
        norm,
    })
}

/// Photon-number distribution of the cat state,
/// P(n) = |(α+δα)^n e^{−|α+δα|²/2} − ε α^n e^{−|α|²/2}|² / (N_cat n!).
pub fn cat_photon_distribution(cat: &CatStateParams, n_max: usize) -> Vec<f64> {
    let coeffs = cat.fock_coefficients(n_max);
    let nc = cat.norm_sq();
    coeffs.iter().map(|c| c.norm_sqr() / nc).collect()
}

/// Closed-form cat Wigner function at phase-space point β.
pub fn cat_wigner_at(cat: &CatStateParams, beta: C64) -> f64 {
    let d = cat.delta_alpha;
    let e_d2 = (-d.norm_sqr()).exp();
    let u = beta - cat.alpha;
    let direct = (-2.0 * (beta - cat.shifted()).norm_sqr()).exp();
    let depleted = e_d2 * (-2.0 * u.norm_sqr()).exp();
    let cross = 2.0 * (2.0 * u * d.conj()).exp().re * e_d2 * (-2.0 * u.norm_sqr()).exp();
    2.0 / (PI * cat.norm_sq()) * (direct + depleted - cross)
}

/// Closed-form Wigner function of the cat state on the given axes.
pub fn cat_wigner(cat: &CatStateParams, x_axis: &[f64], p_axis: &[f64]) -> Result<WignerGrid> {
    let centers = [cat.alpha, cat.shifted()];
    check_grid_span(x_axis, p_axis, &centers)?;
    let mut values = Vec::with_capacity(x_axis.len() * p_axis.len());
    for &p in p_axis {
        for &x in x_axis {
            let beta = C64::new(x, p) / std::f64::consts::SQRT_2;
            values.push(cat_wigner_at(cat, beta));
        }
    }
    WignerGrid::new(x_axis.to_vec(), p_axis.to_vec(), values)
}

/// Kitten-limit Wigner function at phase-space point β,
/// W(β) = (2/π)(4|β−α|² − 1) e^{−2|β−α|²}.
pub fn kitten_wigner_at(alpha: C64, beta: C64) -> f64 {
    let r2 = (beta - alpha).norm_sqr();
    2.0 / PI * (4.0 * r2 - 1.0) * (-2.0 * r2).exp()
}

/// Wigner function of the kitten limit (displaced one-photon Fock state) on
/// the given axes.
pub fn kitten_wigner(alpha: C64, x_axis: &[f64], p_axis: &[f64]) -> Result<WignerGrid> {
    check_grid_span(x_axis, p_axis, &[alpha])?;
    let mut values = Vec::with_capacity(x_axis.len() * p_axis.len());
    for &p in p_axis {
        for &x in x_axis {
            let beta = C64::new(x, p) / std::f64::consts::SQRT_2;
            values.push(kitten_wigner_at(alpha, beta));
        }
    }
    WignerGrid::new(x_axis.to_vec(), p_axis.to_vec(), values)
}

/// Photon distribution of the kitten state D(α)|1⟩,
/// P(n) = |n/α − α*|² |α|^{2n} e^{−|α|²} / n!; α = 0 degenerates to |1⟩.
pub fn kitten_photon_distribution(alpha: C64, n_max: usize) -> Vec<f64> {
    if alpha.norm() == 0.0 {
        let mut p = vec![0.0; n_max + 1];
        if n_max >= 1 {
            p[1] = 1.0;
        }
        return p;
    }
    (0..=n_max)
        .map(|n| {
            // ⟨n|D(α)|1⟩ = √n c_{n−1}(α) − α* c_n(α)
            let c_n = coherent_fock_coefficient(n, alpha);
            let c_prev = if n == 0 {
                C64::new(0.0, 0.0)
            } else {
                coherent_fock_coefficient(n - 1, alpha)
            };
            ((n as f64).sqrt() * c_prev - alpha.conj() * c_n).norm_sqr()
        })
        .collect()
}

/// True when the phase of δα lies inside the open depletion window
/// (π/2 + arcsin(|δα|/2|α|), 3π/2 − arcsin(|δα|/2|α|)) relative to the phase
/// of α, i.e. the shift reduces |α + δα| below |α|.
pub fn depletion_phase_window(alpha: C64, delta_alpha: C64) -> Result<bool> {
    let ratio = delta_alpha.norm() / (2.0 * alpha.norm());
    if !ratio.is_finite() || ratio > 1.0 {
        return Err(Error::validation(format!(
            "|delta_alpha| = {} exceeds 2|alpha| = {}; arcsin undefined",
            delta_alpha.norm(),
            2.0 * alpha.norm()
        )));
    }
    let s = ratio.asin();
    let mut rel = delta_alpha.arg() - alpha.arg();
    while rel < 0.0 {
        rel += 2.0 * PI;
    }
    while rel >= 2.0 * PI {
        rel -= 2.0 * PI;
    }
    Ok(rel > 0.5 * PI + s && rel < 1.5 * PI - s)
}

use crate::quantum::grid_spans_centers as check_grid_span;

/// Spectrum CSV with header `omega_au,intensity`.
pub fn write_spectrum_csv(path: &std::path::Path, spectrum: &[(f64, f64)]) -> Result<()> {
    use std::io::Write;
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "omega_au,intensity")?;
    for (w, i) in spectrum {
        writeln!(f, "{w:.17e},{i:.17e}")?;
    }
    Ok(())
}
