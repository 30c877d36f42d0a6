//! Classical driving-field model: pulse envelope, electric field, vector
//! potential, and ponderomotive quantities. All quantities are in atomic
//! units; every other module consumes this one.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::SPEED_OF_LIGHT;

/// Pulse envelope shape. The envelope value is dimensionless and confined to
/// [0, 1] for all times.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Envelope {
    /// sin²(π t / T_pulse) on [0, T_pulse], zero outside.
    Sin2,
    /// Gaussian with FWHM of `n_cycles` optical cycles, truncated at ±4σ and
    /// centred at t = 4σ so the support starts at t = 0.
    Gaussian,
    /// Constant 1 everywhere (monochromatic field).
    Flat,
}

/// Driving-laser parameters.
///
/// `alpha_l` is the initial coherent amplitude of the fundamental mode. Its
/// default phase is −i|α| so that the classical part of the field operator
/// reproduces the cos carrier used by [`classical_field`]; with that choice
/// net photon absorption by the atom shows up directly as a decrease of
/// |α_L + δα_L|.
#[derive(Debug, Clone, Copy)]
pub struct LaserParams {
    /// Field amplitude E₀ (a.u.).
    pub e0: f64,
    /// Angular frequency ω_L (a.u.).
    pub omega_l: f64,
    /// Ionization potential I_p (a.u.).
    pub ip: f64,
    /// Cycle count: pulse length for `Sin2`, envelope FWHM for `Gaussian`.
    pub n_cycles: f64,
    pub envelope: Envelope,
    /// Mode coefficient g(ω_L) along the polarization axis (a.u.).
    pub g: f64,
    /// Number of atoms contributing coherently.
    pub n_atoms: u64,
    /// Initial coherent amplitude of the driving mode.
    pub alpha_l: C64,
}

impl LaserParams {
    /// Parameters with the paper-standard hydrogen defaults:
    /// I_p = 0.5 a.u., ω = 0.057 a.u., E₀ = 0.053 a.u..
    pub fn hydrogen_defaults() -> Self {
        LaserParams {
            e0: 0.053,
            omega_l: 0.057,
            ip: 0.5,
            n_cycles: 12.0,
            envelope: Envelope::Sin2,
            g: 0.1,
            n_atoms: 1,
            alpha_l: C64::new(0.0, -1.0),
        }
    }

    /// Set |α_L|, keeping the −i phase convention.
    pub fn with_alpha_magnitude(mut self, mag: f64) -> Self {
        self.alpha_l = C64::new(0.0, -mag);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.e0 >= 0.0 && self.e0.is_finite()) {
            return Err(Error::validation(format!("E0 must be >= 0, got {}", self.e0)));
        }
        if !(self.omega_l > 0.0) {
            return Err(Error::validation(format!(
                "omega_L must be > 0, got {}",
                self.omega_l
            )));
        }
        if !(self.ip > 0.0) {
            return Err(Error::validation(format!("Ip must be > 0, got {}", self.ip)));
        }
        if self.n_atoms < 1 {
            return Err(Error::validation("n_atoms must be >= 1"));
        }
        if !(self.n_cycles > 0.0) {
            return Err(Error::validation("n_cycles must be > 0"));
        }
        Ok(())
    }

    /// Wavelength in nanometers (derived from ω_L).
    pub fn wavelength_nm(&self) -> f64 {
        crate::omega_to_wavelength_nm(self.omega_l)
    }

    /// Duration of one optical cycle, 2π/ω_L.
    pub fn cycle(&self) -> f64 {
        2.0 * PI / self.omega_l
    }

    /// Gaussian envelope standard deviation (a.u.).
    fn sigma(&self) -> f64 {
        self.n_cycles * self.cycle() / (2.0 * (2.0 * 2.0_f64.ln()).sqrt())
    }

    /// Pulse support [t_start, t_end], or `None` for the flat envelope.
    pub fn support(&self) -> Option<(f64, f64)> {
        match self.envelope {
            Envelope::Sin2 => Some((0.0, self.n_cycles * self.cycle())),
            Envelope::Gaussian => Some((0.0, 8.0 * self.sigma())),
            Envelope::Flat => None,
        }
    }

    /// Time of the envelope (and field) maximum.
    pub fn center(&self) -> f64 {
        match self.support() {
            Some((a, b)) => 0.5 * (a + b),
            None => 0.0,
        }
    }

    /// Ponderomotive potential U_p = E₀²/(4 ω_L²).
    pub fn up(&self) -> f64 {
        ponderomotive(self.e0, self.omega_l)
    }
}

/// Envelope value f(t) ∈ [0, 1].
pub fn envelope(t: f64, params: &LaserParams) -> f64 {
    match params.envelope {
        Envelope::Sin2 => {
            let t_pulse = params.n_cycles * params.cycle();
            if t < 0.0 || t > t_pulse {
                0.0
            } else {
                let s = (PI * t / t_pulse).sin();
                s * s
            }
        }
        Envelope::Gaussian => {
            let sigma = params.sigma();
            let tc = 4.0 * sigma;
            if t < 0.0 || t > 8.0 * sigma {
                0.0
            } else {
                (-(t - tc) * (t - tc) / (2.0 * sigma * sigma)).exp()
            }
        }
        Envelope::Flat => 1.0,
    }
}

/// Classical electric field E_L(t) = E₀ f(t) cos(ω_L (t − t_center)).
///
/// The carrier phase is fixed so the field maximum coincides with the
/// envelope maximum; comparisons against pulse-shape figures are modulo this
/// carrier-envelope phase choice.
pub fn classical_field(t: f64, params: &LaserParams) -> f64 {
    params.e0 * envelope(t, params) * (params.omega_l * (t - params.center())).cos()
}

/// Vector potential A_L(t) with E_L = −(1/c) ∂A_L/∂t and A_L → 0 outside the
/// pulse. The quantity entering electron kinematics is A_L/c; see
/// [`a_over_c`].
pub fn vector_potential(t: f64, params: &LaserParams) -> f64 {
    SPEED_OF_LIGHT * a_over_c(t, params)
}

/// A_L(t)/c = −∫ E_L dτ from the start of the pulse support.
pub fn a_over_c(t: f64, params: &LaserParams) -> f64 {
    let w = params.omega_l;
    match params.envelope {
        Envelope::Flat => -params.e0 / w * (w * t).sin(),
        Envelope::Sin2 => {
            let t_pulse = params.n_cycles * params.cycle();
            let t = t.clamp(0.0, t_pulse);
            -integral_sin2_cos(t, params.e0, w, t_pulse)
        }
        Envelope::Gaussian => {
            let (a, b) = params.support().unwrap();
            let t = t.clamp(a, b);
            if t <= a {
                return 0.0;
            }
            let f = |tau: f64| C64::new(classical_field(tau, params), 0.0);
            -crate::numerics::adaptive_simpson(&f, a, t, 1e-12).re
        }
    }
}

/// Closed-form ∫₀^t E₀ sin²(π τ/T) cos(ω (τ − T/2)) dτ.
fn integral_sin2_cos(t: f64, e0: f64, w: f64, t_pulse: f64) -> f64 {
    let nu = 2.0 * PI / t_pulse;
    let half = 0.5 * w * t_pulse;
    // sin² = (1 − cos(ν τ))/2; expand the product into three carriers.
    let term_main = ((w * t - half).sin() + half.sin()) / w;
    let osc = |freq: f64| -> f64 {
        if freq.abs() < 1e-14 {
            // degenerate case ω = ν (single-cycle pulse)
            t * half.cos()
        } else {
            ((freq * t - half).sin() + half.sin()) / freq
        }
    };
    0.5 * e0 * (term_main - 0.5 * (osc(w + nu) + osc(w - nu)))
}

/// Ponderomotive potential U_p = E₀²/(4 ω²) in atomic units.
pub fn ponderomotive(e0: f64, omega_l: f64) -> f64 {
    e0 * e0 / (4.0 * omega_l * omega_l)
}

/// Export a sampled (t, value) trace as two-column CSV.
pub fn write_trace_csv(
    path: &std::path::Path,
    header: &str,
    samples: impl Iterator<Item = (f64, f64)>,
) -> Result<()> {
    use std::io::Write;
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "{header}")?;
    for (t, v) in samples {
        writeln!(f, "{t:.17e},{v:.17e}")?;
    }
    Ok(())
}
