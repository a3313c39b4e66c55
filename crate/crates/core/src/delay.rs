//! Traversal-time predictions for a barrier stack.
//!
//! * Group delay: `τ_g = ∂φ_T/∂ω + (Δy/c)·n_inc·sinθ`, with the transverse
//!   shift `Δy = -∂φ_T/∂k_y = -(1/(k cosθ))·∂φ_T/∂θ`. The second term turns
//!   the fixed-angle frequency derivative into the fixed-`k_y` one.
//! * Larmor time: every barrier index is scaled by `1 + Ω_L/ω` and the
//!   response of `ln t` to `Ω_L` gives a complex time. Its real part is
//!   identified with the group delay; the out-of-plane (imaginary) part is
//!   added in quadrature.
//! * Semiclassical time: `d·ω/(c²κ)` with κ the Bloch decay constant of the
//!   stack's unit cell.
//!
//! All times are reported both absolute and relative to the air reference
//! `(d cosθ + Δy sinθ)/c`, the time parallel vacuum wavefronts need to reach
//! the laterally shifted exit point.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::deriv::{checked_derivative, Derivative};
use crate::error::{Error, Result};
use crate::stack::{LayerStack, OperatingPoint, Polarization};
use crate::tmm::{amplitudes_at, bloch_analysis, sig12};
use crate::SPEED_OF_LIGHT;

/// Below this transmittance the transmission phase is treated as undefined.
pub const OPAQUE_TRANSMITTANCE: f64 = 1e-8;

/// Initial frequency step, relative to ω.
pub const OMEGA_STEP: f64 = 1e-4;
/// Initial Larmor-frequency step, relative to ω.
pub const LARMOR_STEP: f64 = 1e-5;
/// Smallest relative step before a derivative is flagged.
pub const STEP_FLOOR: f64 = 1e-8;
/// Angular step for ∂φ_T/∂θ, radians.
pub const ANGLE_STEP: f64 = 1e-4;
pub const ANGLE_STEP_FLOOR: f64 = 1e-8;

/// Largest angle accepted by [`angle_scan`].
pub const MAX_SCAN_ANGLE_DEG: f64 = 85.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivativeChecks {
    /// ∂φ_T/∂ω at fixed angle, fs.
    pub phase_omega: Derivative,
    /// ∂φ_T/∂θ at fixed ω, rad/rad.
    pub phase_angle: Derivative,
    /// ∂φ_T/∂Ω_L, fs.
    pub larmor_phase: Derivative,
    /// ∂ln|t|/∂Ω_L, fs.
    pub larmor_log_modulus: Derivative,
}

impl DerivativeChecks {
    pub fn all(&self) -> [(&'static str, &Derivative); 4] {
        [
            ("phase_omega", &self.phase_omega),
            ("phase_angle", &self.phase_angle),
            ("larmor_phase", &self.larmor_phase),
            ("larmor_log_modulus", &self.larmor_log_modulus),
        ]
    }

    pub fn all_converged(&self) -> bool {
        self.all().iter().all(|(_, d)| d.converged)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayReport {
    pub transmittance: f64,
    /// τ_g, fs.
    pub group_delay: f64,
    /// Δy, nm.
    pub transverse_shift: f64,
    /// ∂φ_T/∂ω at fixed angle, fs.
    pub phase_derivative: f64,
    /// Imaginary part of the complex Larmor time, fs.
    pub larmor_out_of_plane: f64,
    /// Raw real part of the complex Larmor time (replaced by τ_g in
    /// `larmor_time`), fs.
    pub larmor_in_plane_raw: f64,
    /// `sqrt(τ_g² + τ_out²)`, fs.
    pub larmor_time: f64,
    /// `None` outside the Bloch gap.
    pub semiclassical_time: Option<f64>,
    pub air_time: f64,
    pub relative_group_delay: f64,
    pub relative_larmor_time: f64,
    pub derivatives: DerivativeChecks,
    pub flags: Vec<String>,
}

fn check_transmission(stack: &LayerStack, point: &OperatingPoint) -> Result<f64> {
    point.validate()?;
    stack.validate()?;
    let amps = amplitudes_at(stack, point.omega(), point.angle, point.polarization);
    if !(amps.transmittance > OPAQUE_TRANSMITTANCE) {
        return Err(Error::OpaquePoint {
            transmittance: amps.transmittance,
        });
    }
    Ok(amps.transmittance)
}

fn phase_difference(plus: Complex64, minus: Complex64) -> f64 {
    (plus / minus).arg()
}

fn phase_omega(stack: &LayerStack, point: &OperatingPoint) -> Derivative {
    let (omega, angle, pol) = (point.omega(), point.angle, point.polarization);
    let t = |w: f64| amplitudes_at(stack, w, angle, pol).t;
    checked_derivative(
        |h| phase_difference(t(omega + h), t(omega - h)),
        OMEGA_STEP * omega,
        STEP_FLOOR * omega,
    )
}

fn phase_angle(stack: &LayerStack, point: &OperatingPoint) -> Derivative {
    let (omega, angle, pol) = (point.omega(), point.angle, point.polarization);
    let t = |a: f64| amplitudes_at(stack, omega, a, pol).t;
    // Keep θ + h below grazing.
    let h0 = ANGLE_STEP.min(0.25 * (PI / 2.0 - angle));
    checked_derivative(
        |h| phase_difference(t(angle + h), t(angle - h)),
        h0,
        ANGLE_STEP_FLOOR.min(0.5 * h0),
    )
}

fn larmor_derivatives(stack: &LayerStack, point: &OperatingPoint) -> (Derivative, Derivative) {
    let (omega, angle, pol) = (point.omega(), point.angle, point.polarization);
    let t = |larmor: f64| amplitudes_at(&stack.scale_indices(1.0 + larmor / omega), omega, angle, pol).t;
    let log_ratio = |h: f64| (t(h) / t(-h)).ln();
    let phase = checked_derivative(|h| log_ratio(h).im, LARMOR_STEP * omega, STEP_FLOOR * omega);
    let modulus = checked_derivative(|h| log_ratio(h).re, LARMOR_STEP * omega, STEP_FLOOR * omega);
    (phase, modulus)
}

fn incident_index(stack: &LayerStack) -> f64 {
    stack.incident_medium.re
}

fn shift_from_angle_derivative(stack: &LayerStack, point: &OperatingPoint, dphi_dtheta: f64) -> f64 {
    let k = point.k0() * incident_index(stack);
    -dphi_dtheta / (k * point.angle.cos())
}

/// Δy = -∂φ_T/∂k_y at fixed ω, nm.
pub fn transverse_shift(stack: &LayerStack, point: &OperatingPoint) -> Result<f64> {
    check_transmission(stack, point)?;
    Ok(shift_from_angle_derivative(
        stack,
        point,
        phase_angle(stack, point).value,
    ))
}

fn group_delay_from(stack: &LayerStack, point: &OperatingPoint, dphi_domega: f64, shift: f64) -> f64 {
    dphi_domega + shift * incident_index(stack) * point.angle.sin() / SPEED_OF_LIGHT
}

/// Stationary-phase group delay τ_g, fs.
pub fn group_delay(stack: &LayerStack, point: &OperatingPoint) -> Result<f64> {
    check_transmission(stack, point)?;
    let shift = shift_from_angle_derivative(stack, point, phase_angle(stack, point).value);
    Ok(group_delay_from(stack, point, phase_omega(stack, point).value, shift))
}

/// `(out_of_plane, magnitude)` of the Larmor time, fs.
///
/// The complex time is written `τ_c = -i ∂(ln t)/∂Ω_L` in this crate's
/// `exp(-iωt)` convention, so that its real part `∂φ_T/∂Ω_L` has the sign of
/// the group delay; the out-of-plane part is then `-∂ln|t|/∂Ω_L`.
pub fn larmor_time(stack: &LayerStack, point: &OperatingPoint) -> Result<(f64, f64)> {
    let tau_g = group_delay(stack, point)?;
    let (_, modulus) = larmor_derivatives(stack, point);
    let out_of_plane = -modulus.value;
    Ok((out_of_plane, tau_g.hypot(out_of_plane)))
}

/// Photonic analog `d·ω/(c²κ)` of the semiclassical traversal time, fs, with
/// κ from the stack's unit cell.
pub fn semiclassical_time(stack: &LayerStack, point: &OperatingPoint) -> Result<f64> {
    point.validate()?;
    let cell = stack.unit_cell().ok_or(Error::OutsideGap)?;
    semiclassical_time_with_cell(stack, &cell, point)
}

/// As [`semiclassical_time`] with an explicit unit cell.
pub fn semiclassical_time_with_cell(stack: &LayerStack, cell: &LayerStack, point: &OperatingPoint) -> Result<f64> {
    let bloch = bloch_analysis(cell, point)?;
    if !bloch.in_gap {
        return Err(Error::OutsideGap);
    }
    let omega = point.omega();
    Ok(stack.traversal_length() * omega / (SPEED_OF_LIGHT * SPEED_OF_LIGHT * bloch.kappa))
}

/// Time for vacuum wavefronts to reach the exit point displaced by
/// `transverse_shift`: `n_inc (d cosθ + Δy sinθ)/c`.
pub fn air_time(stack: &LayerStack, point: &OperatingPoint, transverse_shift: f64) -> f64 {
    let d = stack.traversal_length();
    incident_index(stack) * (d * point.angle.cos() + transverse_shift * point.angle.sin()) / SPEED_OF_LIGHT
}

/// Every timescale at one operating point.
pub fn delay_report(stack: &LayerStack, point: &OperatingPoint) -> Result<DelayReport> {
    let transmittance = check_transmission(stack, point)?;
    let d_omega = phase_omega(stack, point);
    let d_angle = phase_angle(stack, point);
    let (larmor_phase, larmor_log_modulus) = larmor_derivatives(stack, point);

    let shift = shift_from_angle_derivative(stack, point, d_angle.value);
    let tau_g = group_delay_from(stack, point, d_omega.value, shift);
    let out_of_plane = -larmor_log_modulus.value;
    let larmor = tau_g.hypot(out_of_plane);
    let air = air_time(stack, point, shift);

    let mut flags = Vec::new();
    let semiclassical = match semiclassical_time(stack, point) {
        Ok(v) => Some(v),
        Err(Error::OutsideGap) => {
            flags.push("no_gap".to_string());
            None
        }
        Err(e) => return Err(e),
    };
    let derivatives = DerivativeChecks {
        phase_omega: d_omega,
        phase_angle: d_angle,
        larmor_phase,
        larmor_log_modulus,
    };
    for (name, d) in derivatives.all() {
        if !d.converged {
            flags.push(format!("unconverged_{name}"));
        }
    }

    Ok(DelayReport {
        transmittance,
        group_delay: tau_g,
        transverse_shift: shift,
        phase_derivative: d_omega.value,
        larmor_out_of_plane: out_of_plane,
        larmor_in_plane_raw: larmor_phase.value,
        larmor_time: larmor,
        semiclassical_time: semiclassical,
        air_time: air,
        relative_group_delay: tau_g - air,
        relative_larmor_time: larmor - air,
        derivatives,
        flags,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub angle_deg: f64,
    pub transmittance: f64,
    /// `None` when the point could not be evaluated; see `error`.
    pub report: Option<DelayReport>,
    pub error: Option<String>,
}

impl ScanRow {
    pub fn flags(&self) -> Vec<String> {
        match (&self.report, &self.error) {
            (Some(r), _) => r.flags.clone(),
            (None, Some(e)) if e.starts_with("opaque") => vec!["opaque".to_string()],
            (None, _) => vec!["error".to_string()],
        }
    }

    pub fn is_flagged(&self) -> bool {
        self.report
            .as_ref()
            .is_none_or(|r| r.flags.iter().any(|f| f != "no_gap"))
    }
}

/// Delay reports across incidence angles (degrees). Per-point numerical
/// failures become flagged rows; out-of-range inputs fail the whole scan.
pub fn angle_scan(
    stack: &LayerStack,
    wavelength_nm: f64,
    pol: Polarization,
    angles_deg: &[f64],
) -> Result<Vec<ScanRow>> {
    stack.validate()?;
    OperatingPoint::new(wavelength_nm, 0.0, pol)?;
    for &a in angles_deg {
        if !(0.0..=MAX_SCAN_ANGLE_DEG).contains(&a) {
            return Err(Error::validation(
                "angles",
                format!("{a} deg outside [0, {MAX_SCAN_ANGLE_DEG}]"),
            ));
        }
    }
    angles_deg
        .par_iter()
        .map(|&deg| {
            let point = OperatingPoint::from_degrees(wavelength_nm, deg, pol)?;
            let transmittance = amplitudes_at(stack, point.omega(), point.angle, pol).transmittance;
            Ok(match delay_report(stack, &point) {
                Ok(report) => ScanRow {
                    angle_deg: deg,
                    transmittance,
                    report: Some(report),
                    error: None,
                },
                Err(e) if e.is_numerical() => ScanRow {
                    angle_deg: deg,
                    transmittance,
                    report: None,
                    error: Some(e.to_string()),
                },
                Err(e) => return Err(e),
            })
        })
        .collect()
}

/// Evenly spaced angles `from..=to` in degrees.
pub fn angle_grid(from_deg: f64, to_deg: f64, step_deg: f64) -> Result<Vec<f64>> {
    if !(step_deg > 0.0) || !step_deg.is_finite() {
        return Err(Error::validation("step", "must be > 0"));
    }
    if !(to_deg >= from_deg) {
        return Err(Error::validation("to", "must be >= from"));
    }
    let n = ((to_deg - from_deg) / step_deg + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| from_deg + step_deg * i as f64).collect())
}

/// `angle_deg,transmittance,rel_group_delay_fs,rel_larmor_fs,semiclassical_fs,transverse_shift_nm,flags`
pub fn write_scan_csv<W: Write>(rows: &[ScanRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "angle_deg",
        "transmittance",
        "rel_group_delay_fs",
        "rel_larmor_fs",
        "semiclassical_fs",
        "transverse_shift_nm",
        "flags",
    ])?;
    for row in rows {
        let opt = |v: Option<f64>| v.map(sig12).unwrap_or_default();
        let r = row.report.as_ref();
        w.write_record([
            sig12(row.angle_deg),
            sig12(row.transmittance),
            opt(r.map(|r| r.relative_group_delay)),
            opt(r.map(|r| r.relative_larmor_time)),
            opt(r.and_then(|r| r.semiclassical_time)),
            opt(r.map(|r| r.transverse_shift)),
            row.flags().join("|"),
        ])?;
    }
    w.flush()?;
    Ok(())
}
