//! Quantum-optical toolkit for strongly laser-driven atoms.
//!
//! The crate models the back-action of high-harmonic generation (HHG) and
//! above-threshold ionization (ATI) on the coherent state of the driving
//! laser mode, the optical cat/kitten states produced by conditioning on
//! those processes, and the homodyne-tomography / shot-correlation analysis
//! used to characterize them.
//!
//! Everything is computed in atomic units with the quadrature convention
//! `x = (a + a†)/√2` (vacuum variance 1/2, coherent peak at `√2 Re α`).
//!
//! Module map:
//! - [`field`]: classical driving field (envelope, carrier, vector potential,
//!   ponderomotive energy).
//! - [`sfa`]: strong-field-approximation engine (semiclassical action, saddle
//!   points of the three-step equations, dipole synthesis/ingestion).
//! - [`quantum`]: shared quantum-optical kernel (coherent amplitudes, Fock
//!   expansions, Wigner evaluation, density matrices) — the oracle layer.
//! - [`hhg`]: coherent shift δα(t), harmonic amplitudes β_q, photon
//!   statistics, and conditioned cat/kitten states.
//! - [`ati`]: ATI-conditioned field states (discretized single-ionization
//!   superposition and constant-shift total-ATI Wigner function).
//! - [`tomography`]: homodyne sampling, filtered back-projection, and
//!   maximum-likelihood density-matrix reconstruction.
//! - [`qspec`]: shot-record conditioning along the anti-correlation diagonal
//!   with comb fitting and background subtraction.

pub mod ati;
pub mod error;
pub mod field;
pub mod hhg;
pub mod numerics;
pub mod qspec;
pub mod quantum;
pub mod sfa;
pub mod tomography;

pub use error::{Error, Result};

/// Speed of light in atomic units.
pub const SPEED_OF_LIGHT: f64 = 137.035999084;

/// Convert a wavelength in nanometers to an angular frequency in atomic units.
pub fn wavelength_nm_to_omega(lambda_nm: f64) -> f64 {
    // omega = 2 pi c / lambda, with 1 bohr = 0.052917721 nm
    const BOHR_NM: f64 = 0.052917721090380;
    2.0 * std::f64::consts::PI * SPEED_OF_LIGHT * BOHR_NM / lambda_nm
}

/// Convert an angular frequency in atomic units to a wavelength in nanometers.
pub fn omega_to_wavelength_nm(omega: f64) -> f64 {
    const BOHR_NM: f64 = 0.052917721090380;
    2.0 * std::f64::consts::PI * SPEED_OF_LIGHT * BOHR_NM / omega
}
