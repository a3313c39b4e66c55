//! Transfer-matrix solution of planar multilayers.
//!
//! Fields are written with time dependence `exp(-iωt)`; a forward wave in a
//! layer goes as `exp(+i k_z z)`. Each layer acts on the tangential
//! `(E, H)` pair through its characteristic matrix
//!
//! ```text
//!     [  cos δ        -i sin δ / η ]
//!     [ -i η sin δ     cos δ       ]      δ = k0 q d,  q = sqrt(n² - β²)
//! ```
//!
//! with `β = n_inc sinθ`, `η_S = q` and `η_P = n²/q`. The branch of `q` has
//! `Im q ≥ 0` so that evanescent fields decay toward the exit. Amplitudes are
//! ratios of tangential electric fields, which makes P and S coincide at
//! normal incidence.

use std::f64::consts::{FRAC_PI_2, PI};
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{require_finite, Error, Result};
use crate::stack::{Layer, LayerStack, OperatingPoint, Polarization};
use crate::{angular_frequency, SPEED_OF_LIGHT};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Smallest wavelength step used when refining a sweep for phase continuity.
pub const MIN_SWEEP_STEP_NM: f64 = 1e-6;

/// `|Im(K Λ)|` above which a Bloch mode counts as evanescent.
pub const GAP_TOLERANCE: f64 = 1e-9;

/// Phase increments at or above this are refined before accumulation.
const MAX_PHASE_STEP: f64 = FRAC_PI_2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScatteringAmplitudes {
    pub t: Complex64,
    pub r: Complex64,
    /// Unwrapped transmission phase, continued from zero frequency.
    pub phi_t: f64,
    pub transmittance: f64,
    pub reflectance: f64,
}

/// `t`, `r` and the power coefficients without phase unwrapping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Amplitudes {
    pub t: Complex64,
    pub r: Complex64,
    pub transmittance: f64,
    pub reflectance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochResult {
    /// Bloch wavevector K, rad/nm, with `Re(KΛ) ∈ [0, π]`.
    pub quasimomentum: Complex64,
    /// Evanescent decay constant `|Im K|`, 1/nm.
    pub kappa: f64,
    pub in_gap: bool,
    /// Half trace of the unit-cell matrix, `cos(KΛ)`.
    pub half_trace: Complex64,
    /// Cell thickness Λ, nm.
    pub period_nm: f64,
}

/// Longitudinal index `q = sqrt(n² - β²)` on the decaying branch.
pub fn longitudinal_index(n: Complex64, beta: Complex64) -> Complex64 {
    let mut q = (n * n - beta * beta).sqrt();
    if q.im < 0.0 || (q.im == 0.0 && q.re < 0.0) {
        q = -q;
    }
    q
}

fn admittance(n: Complex64, q: Complex64, pol: Polarization) -> Complex64 {
    match pol {
        Polarization::S => q,
        Polarization::P => n * n / q,
    }
}

type Mat2 = [[Complex64; 2]; 2];

const IDENTITY: Mat2 = [
    [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
    [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
];

fn matmul(a: &Mat2, b: &Mat2) -> Mat2 {
    [
        [
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
        ],
        [
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        ],
    ]
}

fn layer_matrix(layer: &Layer, k0: f64, beta: Complex64, pol: Polarization) -> Mat2 {
    let n = layer.refractive_index;
    let q = longitudinal_index(n, beta);
    let eta = admittance(n, q, pol);
    let delta = q * (k0 * layer.thickness_nm);
    let (c, s) = (delta.cos(), delta.sin());
    [[c, -I * s / eta], [-I * eta * s, c]]
}

/// Product of the characteristic matrices, entrance layer first.
fn characteristic_matrix<'a>(
    layers: impl Iterator<Item = &'a Layer>,
    k0: f64,
    beta: Complex64,
    pol: Polarization,
) -> Mat2 {
    layers.fold(IDENTITY, |acc, l| matmul(&acc, &layer_matrix(l, k0, beta, pol)))
}

/// Solves one stack for vacuum wavenumber `k0` (rad/nm) and effective
/// transverse index `beta = n_inc sinθ`.
pub(crate) fn solve(stack: &LayerStack, k0: f64, beta: Complex64, pol: Polarization) -> Amplitudes {
    let n0 = stack.incident_medium;
    let ns = stack.exit_medium;
    let eta0 = admittance(n0, longitudinal_index(n0, beta), pol);
    let eta_s = admittance(ns, longitudinal_index(ns, beta), pol);

    let air_gap;
    let m = if stack.layers.is_empty() {
        // The reference stack is a slab of incident medium of the air length.
        air_gap = Layer {
            refractive_index: n0,
            thickness_nm: stack.air_length_nm,
        };
        characteristic_matrix(std::iter::once(&air_gap), k0, beta, pol)
    } else {
        characteristic_matrix(stack.layers.iter(), k0, beta, pol)
    };

    let b = m[0][0] + m[0][1] * eta_s;
    let c = m[1][0] + m[1][1] * eta_s;
    let denom = eta0 * b + c;
    let t = 2.0 * eta0 / denom;
    let r = (eta0 * b - c) / denom;
    let transmittance = if eta0.re > 0.0 {
        t.norm_sqr() * eta_s.re / eta0.re
    } else {
        0.0
    };
    Amplitudes {
        t,
        r,
        transmittance,
        reflectance: r.norm_sqr(),
    }
}

fn effective_beta(stack: &LayerStack, angle: f64) -> Complex64 {
    stack.incident_medium * angle.sin()
}

/// Amplitudes at angular frequency `omega` (rad/fs) and incidence `angle`
/// (rad). No validation and no phase unwrapping; the fast path for sweeps,
/// derivatives and quadrature.
pub fn amplitudes_at(stack: &LayerStack, omega: f64, angle: f64, pol: Polarization) -> Amplitudes {
    solve(stack, omega / SPEED_OF_LIGHT, effective_beta(stack, angle), pol)
}

fn check_inputs(stack: &LayerStack, point: &OperatingPoint) -> Result<()> {
    point.validate()?;
    stack.validate()
}

/// Full scattering solution with the transmission phase continued
/// (unwrapped) from ω = 0 at fixed angle.
pub fn scattering(stack: &LayerStack, point: &OperatingPoint) -> Result<ScatteringAmplitudes> {
    check_inputs(stack, point)?;
    let omega = point.omega();
    let amps = amplitudes_at(stack, omega, point.angle, point.polarization);
    let phi_t = unwrapped_phase(stack, omega, point.angle, point.polarization);
    Ok(ScatteringAmplitudes {
        t: amps.t,
        r: amps.r,
        phi_t,
        transmittance: amps.transmittance,
        reflectance: amps.reflectance,
    })
}

/// Continues `arg t` from ω = 0 (where the stack is transparent and `t` is
/// the static interface coefficient) up to `omega`.
fn unwrapped_phase(stack: &LayerStack, omega: f64, angle: f64, pol: Polarization) -> f64 {
    let path: f64 = if stack.layers.is_empty() {
        stack.incident_medium.norm() * stack.air_length_nm
    } else {
        stack
            .layers
            .iter()
            .map(|l| l.refractive_index.norm() * l.thickness_nm)
            .sum()
    };
    // Generous bound on the accumulated phase; a few π extra for resonances.
    let estimate = 2.0 * omega / SPEED_OF_LIGHT * path + 4.0 * PI;
    let steps = ((estimate / 0.5).ceil() as usize).max(16);
    let t_at = |w: f64| amplitudes_at(stack, w, angle, pol).t;

    let mut prev_w = 0.0;
    let mut prev_t = t_at(0.0);
    let mut phase = prev_t.arg();
    for k in 1..=steps {
        let w = omega * k as f64 / steps as f64;
        let t = t_at(w);
        phase += phase_increment(&t_at, prev_w, w, prev_t, t, 0);
        prev_w = w;
        prev_t = t;
    }
    phase
}

/// `arg(t_b / t_a)` accumulated over `[a, b]`, bisecting until every piece
/// moves the phase by less than [`MAX_PHASE_STEP`].
fn phase_increment<F: Fn(f64) -> Complex64>(
    t_at: &F,
    a: f64,
    b: f64,
    t_a: Complex64,
    t_b: Complex64,
    depth: u32,
) -> f64 {
    let delta = (t_b / t_a).arg();
    if delta.abs() < MAX_PHASE_STEP || depth >= 48 {
        return delta;
    }
    let mid = 0.5 * (a + b);
    let t_mid = t_at(mid);
    phase_increment(t_at, a, mid, t_a, t_mid, depth + 1) + phase_increment(t_at, mid, b, t_mid, t_b, depth + 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSample {
    pub wavelength_nm: f64,
    pub transmittance: f64,
    pub reflectance: f64,
    pub phi_t: f64,
}

/// Transmission across a wavelength sweep. The phase column is unwrapped
/// along the sweep: intervals where `arg t` jumps by π/2 or more are bisected
/// down to [`MIN_SWEEP_STEP_NM`].
pub fn transmission_spectrum(
    stack: &LayerStack,
    wavelengths_nm: &[f64],
    angle: f64,
    pol: Polarization,
) -> Result<Vec<SpectrumSample>> {
    if wavelengths_nm.is_empty() {
        return Err(Error::validation("wavelengths", "must not be empty"));
    }
    for w in wavelengths_nm.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::validation("wavelengths", "must be sorted strictly ascending"));
        }
    }
    let first = OperatingPoint::new(wavelengths_nm[0], angle, pol)?;
    for &w in wavelengths_nm {
        require_finite("wavelengths", w)?;
        if w <= 0.0 {
            return Err(Error::validation("wavelengths", "must be > 0"));
        }
    }
    stack.validate()?;

    let amps: Vec<Amplitudes> = wavelengths_nm
        .par_iter()
        .map(|&w| amplitudes_at(stack, angular_frequency(w), angle, pol))
        .collect();

    let t_at = |lambda: f64| amplitudes_at(stack, angular_frequency(lambda), angle, pol).t;
    let mut phase = scattering(stack, &first)?.phi_t;
    let mut out = Vec::with_capacity(amps.len());
    for (i, (&lambda, a)) in wavelengths_nm.iter().zip(&amps).enumerate() {
        if i > 0 {
            phase += sweep_increment(&t_at, wavelengths_nm[i - 1], lambda, amps[i - 1].t, a.t);
        }
        out.push(SpectrumSample {
            wavelength_nm: lambda,
            transmittance: a.transmittance,
            reflectance: a.reflectance,
            phi_t: phase,
        });
    }
    Ok(out)
}

fn sweep_increment<F: Fn(f64) -> Complex64>(t_at: &F, a: f64, b: f64, t_a: Complex64, t_b: Complex64) -> f64 {
    let delta = (t_b / t_a).arg();
    if delta.abs() < MAX_PHASE_STEP || (b - a) <= MIN_SWEEP_STEP_NM {
        return delta;
    }
    let mid = 0.5 * (a + b);
    let t_mid = t_at(mid);
    sweep_increment(t_at, a, mid, t_a, t_mid) + sweep_increment(t_at, mid, b, t_mid, t_b)
}

/// Writes `wavelength_nm,transmittance,reflectance,phi_T_rad` with 12
/// significant digits.
pub fn write_spectrum_csv<W: Write>(samples: &[SpectrumSample], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["wavelength_nm", "transmittance", "reflectance", "phi_T_rad"])?;
    for s in samples {
        w.write_record([
            sig12(s.wavelength_nm),
            sig12(s.transmittance),
            sig12(s.reflectance),
            sig12(s.phi_t),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Formats with 12 significant digits.
pub fn sig12(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let s = format!("{v:.11e}");
    // Parse-and-print drops trailing zeros while keeping the 12-digit rounding.
    let rounded: f64 = s.parse().unwrap_or(v);
    format!("{rounded}")
}

/// Bloch analysis of one period: `cos(KΛ) = ½ tr M_cell`.
pub fn bloch_analysis(unit_cell: &LayerStack, point: &OperatingPoint) -> Result<BlochResult> {
    check_inputs(unit_cell, point)?;
    if unit_cell.layers.is_empty() {
        return Err(Error::validation("unit_cell", "must contain at least one layer"));
    }
    let period = unit_cell.total_thickness();
    if period <= 0.0 {
        return Err(Error::validation("unit_cell", "zero-thickness cell"));
    }
    let k0 = point.k0();
    let beta = point.transverse_wavevector(unit_cell.incident_medium) / k0;
    let m = characteristic_matrix(unit_cell.layers.iter(), k0, beta, point.polarization);
    let half_trace = 0.5 * (m[0][0] + m[1][1]);
    let lossless = unit_cell.layers.iter().all(|l| l.refractive_index.im == 0.0);
    let mut phase = half_trace.acos();
    if lossless {
        // ±K and K + 2π are all solutions; report Re ∈ [0, π], Im ≥ 0.
        phase = Complex64::new(phase.re.abs().min(PI), phase.im.abs());
    }
    let kappa = phase.im.abs() / period;
    Ok(BlochResult {
        quasimomentum: phase / period,
        kappa,
        in_gap: phase.im.abs() > GAP_TOLERANCE,
        half_trace,
        period_nm: period,
    })
}

/// Amplitude scattering matrix of a stack seen as a two-port, referenced to
/// tangential E in the ambient media: `s11`/`s21` for incidence from the
/// front, `s22`/`s12` from the back.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoPort {
    pub s11: Complex64,
    pub s21: Complex64,
    pub s12: Complex64,
    pub s22: Complex64,
}

impl TwoPort {
    /// Front port for `stack` at vacuum wavenumber `k0` and `beta = n_inc sinθ`.
    pub fn of_stack(stack: &LayerStack, k0: f64, beta: Complex64, pol: Polarization) -> Self {
        let fwd = solve(stack, k0, beta, pol);
        let mut back = stack.reversed();
        std::mem::swap(&mut back.incident_medium, &mut back.exit_medium);
        let bwd = solve(&back, k0, beta, pol);
        TwoPort {
            s11: fwd.r,
            s21: fwd.t,
            s12: bwd.t,
            s22: bwd.r,
        }
    }

    /// Redheffer star product: `self` followed by `next`.
    pub fn cascade(&self, next: &TwoPort) -> TwoPort {
        let loop_gain = Complex64::new(1.0, 0.0) - self.s22 * next.s11;
        TwoPort {
            s11: self.s11 + self.s12 * self.s21 * next.s11 / loop_gain,
            s21: self.s21 * next.s21 / loop_gain,
            s12: next.s12 * self.s12 / loop_gain,
            s22: next.s22 + next.s21 * next.s12 * self.s22 / loop_gain,
        }
    }
}
