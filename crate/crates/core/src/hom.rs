//! Two-photon coincidence-dip model.
//!
//! # Model
//!
//! A pump of frequency `2ω₀` produces photon pairs at conjugate detunings:
//!
//! ```text
//!     |ψ⟩ = ∫ dΩ f(Ω) a₁†(ω₀ + Ω) a₂†(ω₀ − Ω) |0⟩,     f even and real.
//! ```
//!
//! Arm 1 passes through the barrier (`a₁† → t(ω) a₁†`), arm 2 through a
//! variable delay (`a₂† → e^{iωτ} a₂†`). The two arms meet on a 50/50 beam
//! splitter. Coincidences between its outputs come from the "both
//! transmitted" and "both reflected" paths, which carry opposite signs, so
//! the two-photon amplitude at the detectors is proportional to
//!
//! ```text
//!     g(Ω) − g(−Ω),      g(Ω) = f(Ω) t(ω₀ + Ω) e^{i(ω₀ − Ω)τ}.
//! ```
//!
//! Integrating `|g(Ω) − g(−Ω)|²/4` over Ω and using the evenness of `f`:
//!
//! ```text
//!     P(τ) ∝ ∫ |f|² ½(|t(ω₀+Ω)|² + |t(ω₀−Ω)|²) dΩ
//!          − Re ∫ |f|² t(ω₀+Ω) t*(ω₀−Ω) e^{−2iΩτ} dΩ.
//! ```
//!
//! The oscillating second term vanishes for `|τ|` much larger than the
//! correlation time, leaving the first; rates here are divided by it, so the
//! plateau is 1 and absolute scale (half of all pairs for distinguishable
//! photons) drops out. With `t(ω) ≈ |t| e^{i(φ₀ + τ_g(ω − ω₀))}` the second
//! term peaks at `τ = τ_g`: the dip sits at the barrier's group delay.
//!
//! The frequency integrals use Gauss-Legendre quadrature with the barrier
//! evaluated directly at every node; the node count is doubled until the
//! rates settle.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::deriv::{checked_derivative, Derivative};
use crate::error::{require_positive, Error, Result};
use crate::quadrature::GaussLegendre;
use crate::stack::{air_reference, LayerStack, Polarization};
use crate::tmm::{amplitudes_at, sig12};
use crate::{angular_frequency, SPEED_OF_LIGHT};

/// Gaussian spectra are integrated over ±6σ_Ω.
pub const GAUSSIAN_HALF_WIDTH_SIGMAS: f64 = 6.0;
/// sinc² spectra are integrated over ±16 lobes.
pub const SINC2_HALF_WIDTH_LOBES: f64 = 16.0;
/// Narrowband regime used by [`narrowband_check`], fs.
pub const NARROWBAND_MIN_CORRELATION_FS: f64 = 100.0;

const RATE_CONVERGENCE: f64 = 1e-12;
const MIN_NODES: usize = 32;
const MAX_NODES: usize = 8192;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectralShape {
    Gaussian,
    /// Phase-matching-limited `sinc²` spectrum.
    Sinc2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhotonPairSpectrum {
    pub center_wavelength_nm: f64,
    pub pump_wavelength_nm: f64,
    /// RMS width of the unfiltered dip, fs.
    pub correlation_time_fs: f64,
    pub shape: SpectralShape,
}

impl Default for PhotonPairSpectrum {
    fn default() -> Self {
        PhotonPairSpectrum {
            center_wavelength_nm: 702.0,
            pump_wavelength_nm: 351.0,
            correlation_time_fs: 15.0,
            shape: SpectralShape::Gaussian,
        }
    }
}

impl PhotonPairSpectrum {
    /// Degenerate pairs from a monochromatic pump.
    pub fn degenerate(pump_wavelength_nm: f64, correlation_time_fs: f64) -> Result<Self> {
        let s = PhotonPairSpectrum {
            center_wavelength_nm: 2.0 * pump_wavelength_nm,
            pump_wavelength_nm,
            correlation_time_fs,
            shape: SpectralShape::Gaussian,
        };
        s.validate()?;
        Ok(s)
    }

    /// Degenerate pairs centred at `center_wavelength_nm`.
    pub fn centered(center_wavelength_nm: f64, correlation_time_fs: f64) -> Result<Self> {
        Self::degenerate(0.5 * center_wavelength_nm, correlation_time_fs)
    }

    pub fn with_shape(mut self, shape: SpectralShape) -> Self {
        self.shape = shape;
        self
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("center_wavelength_nm", self.center_wavelength_nm)?;
        require_positive("pump_wavelength_nm", self.pump_wavelength_nm)?;
        require_positive("correlation_time_fs", self.correlation_time_fs)?;
        let mismatch = (self.center_wavelength_nm - 2.0 * self.pump_wavelength_nm).abs();
        if mismatch > 1e-9 * self.center_wavelength_nm {
            return Err(Error::validation(
                "center_wavelength_nm",
                "degenerate photons must sit at twice the pump wavelength",
            ));
        }
        if self.half_width() >= self.center_omega() {
            return Err(Error::validation(
                "correlation_time_fs",
                "spectrum reaches zero frequency",
            ));
        }
        Ok(())
    }

    pub fn center_omega(&self) -> f64 {
        angular_frequency(self.center_wavelength_nm)
    }

    /// Width parameter of `|f(Ω)|²`, rad/fs: σ_Ω for the Gaussian, the lobe
    /// scale W of `sinc²(Ω/W)`.
    pub fn width(&self) -> f64 {
        match self.shape {
            // Interference term ∝ exp(-2σ²τ²): RMS dip width 1/(2σ).
            SpectralShape::Gaussian => 1.0 / (2.0 * self.correlation_time_fs),
            // Interference term is a triangle of half-base 1/W: RMS 1/(W√6).
            SpectralShape::Sinc2 => 1.0 / (self.correlation_time_fs * 6f64.sqrt()),
        }
    }

    /// Half-width of the integration window, rad/fs.
    pub fn half_width(&self) -> f64 {
        match self.shape {
            SpectralShape::Gaussian => GAUSSIAN_HALF_WIDTH_SIGMAS * self.width(),
            SpectralShape::Sinc2 => SINC2_HALF_WIDTH_LOBES * PI * self.width(),
        }
    }

    /// Normalized `|f(Ω)|²`.
    pub fn density(&self, detuning: f64) -> f64 {
        let w = self.width();
        match self.shape {
            SpectralShape::Gaussian => (-0.5 * (detuning / w).powi(2)).exp() / (w * (2.0 * PI).sqrt()),
            SpectralShape::Sinc2 => {
                let x = detuning / w;
                let sinc = if x == 0.0 { 1.0 } else { x.sin() / x };
                sinc * sinc / (PI * w)
            }
        }
    }
}

/// Complex transmission of the filtered arm as a function of ω (rad/fs).
pub trait Barrier: Sync {
    fn transmission(&self, omega: f64) -> Complex64;

    /// Frequency range over which `transmission` is valid.
    fn domain(&self) -> (f64, f64) {
        (0.0, f64::INFINITY)
    }
}

/// Frequency-independent transmission.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantBarrier(pub Complex64);

impl ConstantBarrier {
    pub fn unit() -> Self {
        ConstantBarrier(Complex64::new(1.0, 0.0))
    }
}

impl Barrier for ConstantBarrier {
    fn transmission(&self, _omega: f64) -> Complex64 {
        self.0
    }
}

/// A stack at fixed incidence angle, divided by the transmission of the same
/// thickness of air: the mirror-in versus mirror-out comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct StackBarrier {
    pub stack: LayerStack,
    pub reference: LayerStack,
    pub angle: f64,
    pub polarization: Polarization,
}

impl StackBarrier {
    pub fn relative_to_air(stack: &LayerStack, angle: f64, polarization: Polarization) -> Self {
        StackBarrier {
            stack: stack.clone(),
            reference: air_reference(stack),
            angle,
            polarization,
        }
    }
}

impl Barrier for StackBarrier {
    fn transmission(&self, omega: f64) -> Complex64 {
        let t = amplitudes_at(&self.stack, omega, self.angle, self.polarization).t;
        let t_air = amplitudes_at(&self.reference, omega, self.angle, self.polarization).t;
        t / t_air
    }
}

/// Transmission samples on an ascending frequency grid, interpolated
/// linearly in modulus and unwrapped phase.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedBarrier {
    omegas: Vec<f64>,
    moduli: Vec<f64>,
    phases: Vec<f64>,
}

impl TabulatedBarrier {
    pub fn new(omegas: Vec<f64>, values: Vec<Complex64>) -> Result<Self> {
        if omegas.len() < 2 || omegas.len() != values.len() {
            return Err(Error::validation(
                "table",
                "need at least two (omega, t) samples of equal count",
            ));
        }
        if !omegas.windows(2).all(|w| w[1] > w[0]) {
            return Err(Error::validation("table", "frequencies must ascend strictly"));
        }
        let mut phases = Vec::with_capacity(values.len());
        let mut phase = values[0].arg();
        phases.push(phase);
        for w in values.windows(2) {
            phase += (w[1] / w[0]).arg();
            phases.push(phase);
        }
        Ok(TabulatedBarrier {
            omegas,
            moduli: values.iter().map(|v| v.norm()).collect(),
            phases,
        })
    }

    /// Samples `barrier` at `omegas`.
    pub fn sample<B: Barrier + ?Sized>(barrier: &B, omegas: Vec<f64>) -> Result<Self> {
        let values = omegas.iter().map(|&w| barrier.transmission(w)).collect();
        Self::new(omegas, values)
    }
}

impl Barrier for TabulatedBarrier {
    fn transmission(&self, omega: f64) -> Complex64 {
        let n = self.omegas.len();
        let i = self.omegas.partition_point(|&w| w < omega).clamp(1, n - 1);
        let (w0, w1) = (self.omegas[i - 1], self.omegas[i]);
        let f = (omega - w0) / (w1 - w0);
        let modulus = self.moduli[i - 1] + f * (self.moduli[i] - self.moduli[i - 1]);
        let phase = self.phases[i - 1] + f * (self.phases[i] - self.phases[i - 1]);
        Complex64::from_polar(modulus, phase)
    }

    fn domain(&self) -> (f64, f64) {
        (self.omegas[0], self.omegas[self.omegas.len() - 1])
    }
}

/// Barrier transmission tabulated at quadrature nodes for one spectrum.
struct Tabulation {
    detunings: Vec<f64>,
    /// Quadrature weight × spectral density.
    weights: Vec<f64>,
    /// `t(ω₀ + Ω_i)`.
    t: Vec<Complex64>,
    plateau: f64,
}

impl Tabulation {
    fn new<B: Barrier + ?Sized>(spectrum: &PhotonPairSpectrum, barrier: &B, nodes: usize) -> Self {
        let rule = GaussLegendre::new(nodes);
        let omega0 = spectrum.center_omega();
        let (detunings, weights): (Vec<f64>, Vec<f64>) = rule
            .scaled(spectrum.half_width())
            .map(|(x, w)| (x, w * spectrum.density(x)))
            .unzip();
        let t: Vec<Complex64> = detunings
            .par_iter()
            .map(|&x| barrier.transmission(omega0 + x))
            .collect();
        let n = t.len();
        // Nodes are symmetric, so t(ω₀ − Ω_i) is t[n-1-i].
        let plateau = (0..n)
            .map(|i| weights[i] * 0.5 * (t[i].norm_sqr() + t[n - 1 - i].norm_sqr()))
            .sum();
        Tabulation {
            detunings,
            weights,
            t,
            plateau,
        }
    }

    fn rate(&self, tau: f64) -> f64 {
        let n = self.t.len();
        let interference: f64 = (0..n)
            .map(|i| {
                let pair = self.t[i] * self.t[n - 1 - i].conj();
                let phase = Complex64::from_polar(1.0, -2.0 * self.detunings[i] * tau);
                self.weights[i] * (pair * phase).re
            })
            .sum();
        (self.plateau - interference) / self.plateau
    }
}

/// Normalized coincidence rates for the barrier in one arm.
///
/// The node count starts at 32 and doubles until every requested rate moves
/// by less than 1e-12.
pub struct DipModel {
    tabulation: Tabulation,
}

impl DipModel {
    pub fn new<B: Barrier + ?Sized>(spectrum: &PhotonPairSpectrum, barrier: &B, probe_delays: &[f64]) -> Result<Self> {
        spectrum.validate()?;
        let omega0 = spectrum.center_omega();
        let half = spectrum.half_width();
        let (lo, hi) = barrier.domain();
        if omega0 - half < lo || omega0 + half > hi {
            return Err(Error::UnderSampled);
        }
        let mut probes: Vec<f64> = probe_delays.to_vec();
        let tc = spectrum.correlation_time_fs;
        probes.extend((-8..=8).map(|k| 0.5 * tc * k as f64));

        let mut nodes = MIN_NODES;
        let mut current = Tabulation::new(spectrum, barrier, nodes);
        let mut rates: Vec<f64> = probes.iter().map(|&tau| current.rate(tau)).collect();
        while nodes < MAX_NODES {
            nodes *= 2;
            let next = Tabulation::new(spectrum, barrier, nodes);
            let next_rates: Vec<f64> = probes.iter().map(|&tau| next.rate(tau)).collect();
            let change = rates
                .iter()
                .zip(&next_rates)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            current = next;
            rates = next_rates;
            if change < RATE_CONVERGENCE {
                break;
            }
        }
        if !(current.plateau > 0.0) {
            return Err(Error::OpaquePoint { transmittance: 0.0 });
        }
        Ok(DipModel { tabulation: current })
    }

    pub fn node_count(&self) -> usize {
        self.tabulation.t.len()
    }

    /// Coincidence rate at relative delay `tau` (fs), plateau-normalized.
    pub fn rate(&self, tau: f64) -> f64 {
        self.tabulation.rate(tau)
    }
}

/// Normalized coincidence rate at one relative delay.
pub fn coincidence_rate<B: Barrier + ?Sized>(
    spectrum: &PhotonPairSpectrum,
    barrier: &B,
    relative_delay_fs: f64,
) -> Result<f64> {
    Ok(DipModel::new(spectrum, barrier, &[relative_delay_fs])?.rate(relative_delay_fs))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DipTrace {
    /// Relative delays of the reference arm, fs.
    pub delays_fs: Vec<f64>,
    pub rates: Vec<f64>,
    pub dip_center_fs: f64,
    pub visibility: f64,
}

impl DipTrace {
    /// Trombone prism positions (μm) for the delays; the prism is
    /// double-passed, so `τ = 2x/c`.
    pub fn prism_positions_um(&self) -> Vec<f64> {
        self.delays_fs.iter().map(|&tau| delay_to_prism_um(tau)).collect()
    }
}

pub fn delay_to_prism_um(tau_fs: f64) -> f64 {
    0.5 * tau_fs * SPEED_OF_LIGHT * 1e-3
}

/// Vertex of the least-squares parabola through five samples.
fn parabolic_vertex(xs: &[f64], ys: &[f64]) -> Option<f64> {
    debug_assert_eq!(xs.len(), 5);
    let x0 = xs[2];
    let u: Vec<f64> = xs.iter().map(|x| x - x0).collect();
    // Outer pairs first: odd sums of a symmetric window cancel exactly.
    let sum = |f: &dyn Fn(usize) -> f64| (f(0) + f(4)) + (f(1) + f(3)) + f(2);
    let n = 5.0;
    let su = sum(&|i| u[i]);
    let su2 = sum(&|i| u[i] * u[i]);
    let su3 = sum(&|i| u[i].powi(3));
    let su4 = sum(&|i| u[i].powi(4));
    let sy = sum(&|i| ys[i]);
    let s1 = sum(&|i| u[i] * ys[i]);
    let su2y = sum(&|i| u[i] * u[i] * ys[i]);
    // Normal equations for y = a u² + b u + c.
    let m = [[su4, su3, su2], [su3, su2, su], [su2, su, n]];
    let rhs = [su2y, s1, sy];
    let det = det3(&m);
    if det == 0.0 {
        return None;
    }
    let replace = |col: usize| {
        let mut mm = m;
        for row in 0..3 {
            mm[row][col] = rhs[row];
        }
        det3(&mm) / det
    };
    let (a, b) = (replace(0), replace(1));
    if !(a > 0.0) {
        return None;
    }
    Some(x0 - b / (2.0 * a))
}

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Dip position from sampled rates: parabolic fit over the five samples
/// around the discrete minimum.
pub fn dip_center(delays: &[f64], rates: &[f64]) -> Result<f64> {
    if delays.len() != rates.len() || delays.len() < 5 {
        return Err(Error::DipNotBracketed);
    }
    let (imin, _) = rates.iter().enumerate().fold(
        (0, f64::INFINITY),
        |(bi, bv), (i, &v)| if v < bv { (i, v) } else { (bi, bv) },
    );
    if imin < 2 || imin + 2 >= rates.len() {
        return Err(Error::DipNotBracketed);
    }
    let window = imin - 2..imin + 3;
    parabolic_vertex(&delays[window.clone()], &rates[window]).ok_or(Error::DipNotBracketed)
}

/// Coincidence rate across relative delays, with the extracted dip.
pub fn trace_dip<B: Barrier + ?Sized>(
    spectrum: &PhotonPairSpectrum,
    barrier: &B,
    delays_fs: &[f64],
) -> Result<DipTrace> {
    if delays_fs.iter().any(|d| !d.is_finite()) || !delays_fs.windows(2).all(|w| w[1] > w[0]) {
        return Err(Error::validation("delays", "must be finite and strictly ascending"));
    }
    let model = DipModel::new(spectrum, barrier, delays_fs)?;
    let rates: Vec<f64> = delays_fs.par_iter().map(|&tau| model.rate(tau)).collect();
    let center = dip_center(delays_fs, &rates)?;
    let min_rate = rates.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(DipTrace {
        delays_fs: delays_fs.to_vec(),
        rates,
        dip_center_fs: center,
        visibility: 1.0 - min_rate,
    })
}

/// Evenly spaced delays `from..=to`.
pub fn delay_grid(from_fs: f64, to_fs: f64, step_fs: f64) -> Result<Vec<f64>> {
    if !(step_fs > 0.0) || !step_fs.is_finite() || !(to_fs > from_fs) {
        return Err(Error::validation("delays", "need from < to and step > 0"));
    }
    let n = ((to_fs - from_fs) / step_fs + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| from_fs + step_fs * i as f64).collect())
}

/// Locates the dip without a caller-supplied grid: a coarse scan over ±3
/// correlation times, then a fine grid (step τ_c/1000) around the coarse
/// minimum.
pub fn locate_dip<B: Barrier + ?Sized>(spectrum: &PhotonPairSpectrum, barrier: &B) -> Result<f64> {
    let tc = spectrum.correlation_time_fs;
    let coarse_step = tc / 50.0;
    let coarse: Vec<f64> = (-150..=150).map(|k| coarse_step * k as f64).collect();
    let model = DipModel::new(spectrum, barrier, &coarse)?;
    let rates: Vec<f64> = coarse.iter().map(|&tau| model.rate(tau)).collect();
    let rough = dip_center(&coarse, &rates)?;
    let fine_step = tc / 1000.0;
    let centre = (rough / fine_step).round() * fine_step;
    let fine: Vec<f64> = (-100..=100).map(|k| centre + fine_step * k as f64).collect();
    let fine_rates: Vec<f64> = fine.iter().map(|&tau| model.rate(tau)).collect();
    dip_center(&fine, &fine_rates)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NarrowbandCheck {
    pub dip_shift_fs: f64,
    pub group_delay_fs: f64,
    pub difference_fs: f64,
}

/// Group delay of the barrier itself, `∂ arg t/∂ω` at the spectrum centre.
pub fn barrier_group_delay<B: Barrier + ?Sized>(spectrum: &PhotonPairSpectrum, barrier: &B) -> Derivative {
    let omega0 = spectrum.center_omega();
    checked_derivative(
        |h| (barrier.transmission(omega0 + h) / barrier.transmission(omega0 - h)).arg(),
        crate::delay::OMEGA_STEP * omega0,
        crate::delay::STEP_FLOOR * omega0,
    )
}

/// Dip shift versus phase-derivative group delay in the narrowband regime.
pub fn narrowband_check<B: Barrier + ?Sized>(spectrum: &PhotonPairSpectrum, barrier: &B) -> Result<NarrowbandCheck> {
    spectrum.validate()?;
    if spectrum.correlation_time_fs < NARROWBAND_MIN_CORRELATION_FS {
        return Err(Error::validation(
            "correlation_time_fs",
            format!("narrowband check needs >= {NARROWBAND_MIN_CORRELATION_FS} fs"),
        ));
    }
    let dip_shift = locate_dip(spectrum, barrier)?;
    let group_delay = barrier_group_delay(spectrum, barrier).value;
    Ok(NarrowbandCheck {
        dip_shift_fs: dip_shift,
        group_delay_fs: group_delay,
        difference_fs: dip_shift - group_delay,
    })
}

/// `tau_fs,rate` (or `prism_um,rate` when `prism_microns` is set).
pub fn write_dip_csv<W: Write>(trace: &DipTrace, prism_microns: bool, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([if prism_microns { "prism_um" } else { "tau_fs" }, "rate"])?;
    for (&tau, &rate) in trace.delays_fs.iter().zip(&trace.rates) {
        let x = if prism_microns { delay_to_prism_um(tau) } else { tau };
        w.write_record([sig12(x), sig12(rate)])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DipSummary {
    pub dip_center_fs: f64,
    pub visibility: f64,
}

impl From<&DipTrace> for DipSummary {
    fn from(t: &DipTrace) -> Self {
        DipSummary {
            dip_center_fs: t.dip_center_fs,
            visibility: t.visibility,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spectrum() -> PhotonPairSpectrum {
        PhotonPairSpectrum::default()
    }

    #[test]
    fn unit_barrier_dip_and_plateau() {
        let s = spectrum();
        let unit = ConstantBarrier::unit();
        assert!(coincidence_rate(&s, &unit, 0.0).unwrap().abs() < 1e-12);
        // residual comes from truncating the Gaussian at ±6σ
        assert!((coincidence_rate(&s, &unit, 200.0).unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn correlation_time_is_rms_dip_width() {
        // 1 - R(τ) = exp(-τ²/(2 τc²)) for the Gaussian spectrum
        let s = spectrum();
        let r = coincidence_rate(&s, &ConstantBarrier::unit(), 15.0).unwrap();
        assert!((1.0 - r - (-0.5f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn sinc2_dip_is_triangular() {
        let s = spectrum().with_shape(SpectralShape::Sinc2);
        let unit = ConstantBarrier::unit();
        let half_base = 1.0 / s.width();
        let r_half = coincidence_rate(&s, &unit, 0.5 * half_base).unwrap();
        // truncation of the sinc² tails leaves a small error
        assert!((r_half - 0.5).abs() < 0.02, "{r_half}");
        assert!(coincidence_rate(&s, &unit, 0.0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn constant_attenuation_cancels() {
        let s = spectrum();
        let grid = delay_grid(-40.0, 40.0, 0.25).unwrap();
        let a = trace_dip(&s, &ConstantBarrier::unit(), &grid).unwrap();
        let b = trace_dip(&s, &ConstantBarrier(Complex64::new(0.316, 0.0)), &grid).unwrap();
        assert!((a.dip_center_fs - b.dip_center_fs).abs() < 1e-12);
        assert!((a.visibility - b.visibility).abs() < 1e-12);
        assert_eq!(a.dip_center_fs, 0.0);
        assert!((a.visibility - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pure_delay_moves_the_dip() {
        let s = spectrum();
        struct Delay(f64);
        impl Barrier for Delay {
            fn transmission(&self, omega: f64) -> Complex64 {
                Complex64::from_polar(1.0, omega * self.0)
            }
        }
        let grid = delay_grid(-20.0, 20.0, 0.25).unwrap();
        let trace = trace_dip(&s, &Delay(-3.3), &grid).unwrap();
        assert!((trace.dip_center_fs + 3.3).abs() < 1e-3, "{}", trace.dip_center_fs);
    }

    #[test]
    fn unbracketed_dip_errors() {
        let s = spectrum();
        let grid = delay_grid(10.0, 40.0, 0.25).unwrap();
        assert_eq!(
            trace_dip(&s, &ConstantBarrier::unit(), &grid).unwrap_err(),
            Error::DipNotBracketed
        );
        assert_eq!(Error::DipNotBracketed.to_string(), "dip not bracketed");
    }

    #[test]
    fn under_sampled_table_errors() {
        let s = spectrum();
        let w0 = s.center_omega();
        let narrow = TabulatedBarrier::sample(&ConstantBarrier::unit(), vec![w0 - 0.01, w0, w0 + 0.01]).unwrap();
        let err = coincidence_rate(&s, &narrow, 0.0).unwrap_err();
        assert_eq!(err, Error::UnderSampled);
        assert_eq!(err.to_string(), "transmission table under-sampled");
        let wide = TabulatedBarrier::sample(&ConstantBarrier::unit(), vec![0.5 * w0, w0, 1.5 * w0]).unwrap();
        assert!(coincidence_rate(&s, &wide, 0.0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn spectrum_validation() {
        assert!(PhotonPairSpectrum::degenerate(351.0, 15.0).is_ok());
        let bad = PhotonPairSpectrum {
            pump_wavelength_nm: 400.0,
            ..spectrum()
        };
        assert!(bad.validate().is_err());
        assert!(PhotonPairSpectrum::centered(702.0, 0.0).is_err());
        // bandwidth reaching ω = 0
        assert!(PhotonPairSpectrum::centered(702.0, 0.5).is_err());
    }

    #[test]
    fn density_is_normalized() {
        for shape in [SpectralShape::Gaussian, SpectralShape::Sinc2] {
            let s = spectrum().with_shape(shape);
            let rule = GaussLegendre::new(2048);
            let total: f64 = rule.scaled(s.half_width()).map(|(x, w)| w * s.density(x)).sum();
            let tol = if shape == SpectralShape::Gaussian { 1e-8 } else { 0.02 };
            assert!((total - 1.0).abs() < tol, "{shape:?}: {total}");
        }
    }

    #[test]
    fn narrowband_requires_long_correlation() {
        let s = spectrum();
        assert!(narrowband_check(&s, &ConstantBarrier::unit()).is_err());
        let nb = PhotonPairSpectrum::centered(702.0, 150.0).unwrap();
        let check = narrowband_check(&nb, &ConstantBarrier::unit()).unwrap();
        assert_eq!(check.difference_fs, 0.0);
    }

    #[test]
    fn prism_conversion() {
        // 1 fs of delay is c/2 = 0.1499 μm of prism travel.
        assert!((delay_to_prism_um(1.0) - 0.149896229).abs() < 1e-9);
    }

    #[test]
    fn parabola_recovers_vertex() {
        let xs = [1.0, 1.5, 2.0, 2.5, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * (x - 2.13f64).powi(2) + 0.2).collect();
        assert!((parabolic_vertex(&xs, &ys).unwrap() - 2.13).abs() < 1e-12);
    }
}
