//! Transmission delay times of one-dimensional photonic bandgap mirrors.
//!
//! The crate models a multilayer dielectric mirror as a tunnel barrier for
//! photons and computes:
//!
//! * complex transmission/reflection amplitudes at any wavelength, angle and
//!   polarization ([`tmm`]), plus the Bloch quasimomentum of a periodic cell;
//! * the competing traversal-time predictions: stationary-phase group delay,
//!   the Larmor (complex) time and the semiclassical time ([`delay`]);
//! * the two-photon coincidence-dip measurement used to extract sub-fs delays
//!   ([`hom`]);
//! * perturbation ensembles and figure-ready outputs ([`experiment`]).
//!
//! Units throughout: lengths in nanometres, times in femtoseconds, angular
//! frequencies in rad/fs, angles in radians unless a name says otherwise.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod delay;
pub mod deriv;
pub mod error;
pub mod experiment;
pub mod hom;
pub mod quadrature;
pub mod stack;
pub mod tmm;

pub use delay::{DelayReport, ScanRow};
pub use error::{Error, Result};
pub use hom::{DipTrace, PhotonPairSpectrum, SpectralShape};
pub use stack::{FirstLayer, Layer, LayerStack, OperatingPoint, Polarization};
pub use tmm::{BlochResult, ScatteringAmplitudes};

/// Speed of light in vacuum, nm/fs.
pub const SPEED_OF_LIGHT: f64 = 299.792458;

/// Angular frequency (rad/fs) of light with the given vacuum wavelength (nm).
pub fn angular_frequency(vacuum_wavelength_nm: f64) -> f64 {
    2.0 * std::f64::consts::PI * SPEED_OF_LIGHT / vacuum_wavelength_nm
}

/// Vacuum wavelength (nm) for an angular frequency in rad/fs.
pub fn vacuum_wavelength(omega: f64) -> f64 {
    2.0 * std::f64::consts::PI * SPEED_OF_LIGHT / omega
}
