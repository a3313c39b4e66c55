//! Layered dielectric structures.
//!
//! A [`LayerStack`] is an ordered list of homogeneous [`Layer`]s between two
//! semi-infinite ambient media. An empty stack is the air reference: it keeps
//! a nominal traversal length (`air_length_nm`) so that delays measured
//! against "the same thickness of air" are a plain subtraction.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{require_finite, require_positive, Error, Result};
use crate::{angular_frequency, SPEED_OF_LIGHT};

/// Perturbed thicknesses never drop below this fraction of nominal.
pub const THICKNESS_FLOOR_FRACTION: f64 = 0.01;

const AIR: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Layer {
    pub refractive_index: Complex64,
    pub thickness_nm: f64,
}

impl Layer {
    pub fn new(refractive_index: impl Into<Complex64>, thickness_nm: f64) -> Result<Self> {
        let layer = Layer {
            refractive_index: refractive_index.into(),
            thickness_nm,
        };
        layer.validate()?;
        Ok(layer)
    }

    /// Lossless layer with a real index.
    pub fn lossless(index: f64, thickness_nm: f64) -> Result<Self> {
        Self::new(Complex64::new(index, 0.0), thickness_nm)
    }

    pub fn validate(&self) -> Result<()> {
        require_finite("thickness_nm", self.thickness_nm)?;
        if self.thickness_nm < 0.0 {
            return Err(Error::validation("thickness_nm", "must be >= 0"));
        }
        validate_index("refractive_index", self.refractive_index)
    }

    /// Optical thickness n·d (real part of the index).
    pub fn optical_thickness(&self) -> f64 {
        self.refractive_index.re * self.thickness_nm
    }
}

fn validate_index(field: &str, n: Complex64) -> Result<()> {
    require_finite(field, n.re)?;
    require_finite(field, n.im)?;
    if n.re <= 0.0 {
        return Err(Error::validation(field, "real part must be > 0"));
    }
    if n.im < 0.0 {
        return Err(Error::validation(field, "imaginary part must be >= 0"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FirstLayer {
    High,
    Low,
}

impl FromStr for FirstLayer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "high" | "h" => Ok(FirstLayer::High),
            "low" | "l" => Ok(FirstLayer::Low),
            other => Err(Error::validation(
                "first",
                format!("expected high or low, got {other:?}"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerStack {
    pub incident_medium: Complex64,
    pub exit_medium: Complex64,
    pub layers: Vec<Layer>,
    pub label: String,
    /// Nominal traversal length of an empty (air reference) stack. Ignored
    /// when `layers` is nonempty.
    pub air_length_nm: f64,
}

impl Default for LayerStack {
    fn default() -> Self {
        LayerStack {
            incident_medium: AIR,
            exit_medium: AIR,
            layers: Vec::new(),
            label: String::new(),
            air_length_nm: 0.0,
        }
    }
}

impl LayerStack {
    /// Free-standing stack in air.
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        let stack = LayerStack {
            layers,
            ..Default::default()
        };
        stack.validate()?;
        Ok(stack)
    }

    pub fn with_media(mut self, incident: impl Into<Complex64>, exit: impl Into<Complex64>) -> Result<Self> {
        self.incident_medium = incident.into();
        self.exit_medium = exit.into();
        self.validate()?;
        Ok(self)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn validate(&self) -> Result<()> {
        validate_index("incident_medium", self.incident_medium)?;
        validate_index("exit_medium", self.exit_medium)?;
        for layer in &self.layers {
            layer.validate()?;
        }
        require_finite("air_length_nm", self.air_length_nm)?;
        if self.air_length_nm < 0.0 {
            return Err(Error::validation("air_length_nm", "must be >= 0"));
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    /// Sum of the layer thicknesses.
    pub fn total_thickness(&self) -> f64 {
        self.layers.iter().map(|l| l.thickness_nm).sum()
    }

    /// Physical length a wave crosses: the layer total, or the air length for
    /// an empty reference stack.
    pub fn traversal_length(&self) -> f64 {
        if self.layers.is_empty() {
            self.air_length_nm
        } else {
            self.total_thickness()
        }
    }

    /// Layers in reverse order, same ambient media.
    pub fn reversed(&self) -> LayerStack {
        let mut out = self.clone();
        out.layers.reverse();
        out
    }

    /// Concatenation `self ⊕ other`; keeps `self`'s incident and `other`'s
    /// exit medium.
    pub fn concat(&self, other: &LayerStack) -> LayerStack {
        let mut out = self.clone();
        out.layers.extend_from_slice(&other.layers);
        out.exit_medium = other.exit_medium;
        out
    }

    /// The stack with every layer index multiplied by `factor`; ambient media
    /// are untouched.
    pub fn scale_indices(&self, factor: f64) -> LayerStack {
        let mut out = self.clone();
        for layer in &mut out.layers {
            layer.refractive_index *= factor;
        }
        out
    }

    /// Two-layer period taken from the front of the stack (one layer for a
    /// single-layer stack). `None` when empty.
    pub fn unit_cell(&self) -> Option<LayerStack> {
        if self.layers.is_empty() {
            return None;
        }
        let take = self.layers.len().min(2);
        let mut cell = self.clone();
        cell.layers.truncate(take);
        Some(cell)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: StackFile = serde_json::from_str(text)?;
        file.into_stack()
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    /// Explicit-layer JSON form.
    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ExplicitStack::from(self))?)
    }
}

/// Quarter-wave mirror: layer `j` has thickness `design_wavelength / (4 n_j)`
/// with indices alternating from `first_layer`, in air on both sides.
pub fn build_quarter_wave_stack(
    design_wavelength_nm: f64,
    n_high: f64,
    n_low: f64,
    layer_count: usize,
    first_layer: FirstLayer,
) -> Result<LayerStack> {
    require_positive("design_wavelength_nm", design_wavelength_nm)?;
    require_positive("n_high", n_high)?;
    require_positive("n_low", n_low)?;
    if layer_count < 1 {
        return Err(Error::validation("layer_count", "must be >= 1"));
    }
    let (a, b) = match first_layer {
        FirstLayer::High => (n_high, n_low),
        FirstLayer::Low => (n_low, n_high),
    };
    let layers = (0..layer_count)
        .map(|j| {
            let n = if j % 2 == 0 { a } else { b };
            Layer::lossless(n, design_wavelength_nm / (4.0 * n))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LayerStack::new(layers)?.with_label(format!(
        "quarter-wave {layer_count} layers @ {design_wavelength_nm} nm ({n_high}/{n_low})"
    )))
}

/// Multiplies each layer thickness by an independent N(1, sigma) factor,
/// floored at [`THICKNESS_FLOOR_FRACTION`] of nominal. Deterministic per seed.
pub fn perturb_thicknesses(stack: &LayerStack, relative_sigma: f64, seed: u64) -> Result<LayerStack> {
    require_finite("relative_sigma", relative_sigma)?;
    if !(0.0..0.5).contains(&relative_sigma) {
        return Err(Error::validation(
            "relative_sigma",
            format!("must lie in [0, 0.5), got {relative_sigma}"),
        ));
    }
    let mut out = stack.clone();
    if relative_sigma == 0.0 {
        return Ok(out);
    }
    let normal = Normal::new(1.0, relative_sigma).map_err(|e| Error::validation("relative_sigma", e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for layer in &mut out.layers {
        let factor = normal.sample(&mut rng).max(THICKNESS_FLOOR_FRACTION);
        layer.thickness_nm *= factor;
    }
    Ok(out)
}

/// Empty stack standing in for "the same thickness of air".
pub fn air_reference(stack: &LayerStack) -> LayerStack {
    LayerStack {
        incident_medium: stack.incident_medium,
        exit_medium: stack.exit_medium,
        layers: Vec::new(),
        label: format!("air reference ({})", stack.label),
        air_length_nm: stack.traversal_length(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarization {
    /// TM: electric field in the plane of incidence.
    #[serde(rename = "p", alias = "P", alias = "tm", alias = "TM")]
    P,
    /// TE: electric field perpendicular to the plane of incidence.
    #[serde(rename = "s", alias = "S", alias = "te", alias = "TE")]
    S,
}

impl FromStr for Polarization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "p" | "tm" => Ok(Polarization::P),
            "s" | "te" => Ok(Polarization::S),
            other => Err(Error::validation("pol", format!("expected p or s, got {other:?}"))),
        }
    }
}

impl fmt::Display for Polarization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Polarization::P => "p",
            Polarization::S => "s",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub vacuum_wavelength_nm: f64,
    /// Radians, measured in the incident medium.
    pub angle: f64,
    pub polarization: Polarization,
}

impl OperatingPoint {
    pub fn new(vacuum_wavelength_nm: f64, angle: f64, polarization: Polarization) -> Result<Self> {
        let point = OperatingPoint {
            vacuum_wavelength_nm,
            angle,
            polarization,
        };
        point.validate()?;
        Ok(point)
    }

    pub fn from_degrees(vacuum_wavelength_nm: f64, angle_deg: f64, polarization: Polarization) -> Result<Self> {
        Self::new(vacuum_wavelength_nm, angle_deg.to_radians(), polarization)
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("vacuum_wavelength_nm", self.vacuum_wavelength_nm)?;
        require_finite("angle", self.angle)?;
        if !(0.0..FRAC_PI_2).contains(&self.angle) {
            return Err(Error::validation(
                "angle",
                format!("must lie in [0, pi/2), got {}", self.angle),
            ));
        }
        Ok(())
    }

    pub fn omega(&self) -> f64 {
        angular_frequency(self.vacuum_wavelength_nm)
    }

    /// Vacuum wavenumber ω/c, rad/nm.
    pub fn k0(&self) -> f64 {
        self.omega() / SPEED_OF_LIGHT
    }

    /// Transverse wavevector k_y = (ω/c)·n_inc·sinθ, conserved across layers.
    pub fn transverse_wavevector(&self, incident_medium: Complex64) -> Complex64 {
        incident_medium * (self.k0() * self.angle.sin())
    }
}

/// On-disk stack description: explicit layers or the quarter-wave shorthand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StackFile {
    QuarterWave {
        quarter_wave: QuarterWaveSpec,
        #[serde(default, skip_serializing_if = "String::is_empty")]
        label: String,
    },
    Explicit(ExplicitStack),
}

impl StackFile {
    pub fn into_stack(self) -> Result<LayerStack> {
        match self {
            StackFile::QuarterWave { quarter_wave: q, label } => {
                let stack = build_quarter_wave_stack(q.lambda0_nm, q.n_high, q.n_low, q.count, q.first)?;
                Ok(if label.is_empty() {
                    stack
                } else {
                    stack.with_label(label)
                })
            }
            StackFile::Explicit(e) => e.into_stack(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuarterWaveSpec {
    pub lambda0_nm: f64,
    pub n_high: f64,
    pub n_low: f64,
    pub count: usize,
    #[serde(default = "default_first")]
    pub first: FirstLayer,
}

fn default_first() -> FirstLayer {
    FirstLayer::High
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplicitStack {
    #[serde(default = "air_index")]
    pub incident_medium: IndexValue,
    #[serde(default = "air_index")]
    pub exit_medium: IndexValue,
    pub layers: Vec<LayerEntry>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub label: String,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub air_length_nm: f64,
}

fn air_index() -> IndexValue {
    IndexValue::Real(1.0)
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

impl ExplicitStack {
    fn into_stack(self) -> Result<LayerStack> {
        let stack = LayerStack {
            incident_medium: self.incident_medium.into(),
            exit_medium: self.exit_medium.into(),
            layers: self
                .layers
                .into_iter()
                .map(|l| Layer {
                    refractive_index: l.n.into(),
                    thickness_nm: l.d_nm,
                })
                .collect(),
            label: self.label,
            air_length_nm: self.air_length_nm,
        };
        stack.validate()?;
        Ok(stack)
    }
}

impl From<&LayerStack> for ExplicitStack {
    fn from(s: &LayerStack) -> Self {
        ExplicitStack {
            incident_medium: s.incident_medium.into(),
            exit_medium: s.exit_medium.into(),
            layers: s
                .layers
                .iter()
                .map(|l| LayerEntry {
                    n: l.refractive_index.into(),
                    d_nm: l.thickness_nm,
                })
                .collect(),
            label: s.label.clone(),
            air_length_nm: s.air_length_nm,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerEntry {
    pub n: IndexValue,
    pub d_nm: f64,
}

/// A refractive index written either as a bare number or `{"re": .., "im": ..}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum IndexValue {
    Real(f64),
    Complex { re: f64, im: f64 },
}

impl From<IndexValue> for Complex64 {
    fn from(v: IndexValue) -> Self {
        match v {
            IndexValue::Real(re) => Complex64::new(re, 0.0),
            IndexValue::Complex { re, im } => Complex64::new(re, im),
        }
    }
}

impl From<Complex64> for IndexValue {
    fn from(c: Complex64) -> Self {
        if c.im == 0.0 {
            IndexValue::Real(c.re)
        } else {
            IndexValue::Complex { re: c.re, im: c.im }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn mirror() -> LayerStack {
        build_quarter_wave_stack(692.0, 2.22, 1.41, 11, FirstLayer::High).unwrap()
    }

    #[test]
    fn quarter_wave_mirror_thicknesses() {
        let s = mirror();
        assert_eq!(s.len(), 11);
        for (j, l) in s.layers.iter().enumerate() {
            let expected = if j % 2 == 0 { 2.22 } else { 1.41 };
            assert_eq!(l.refractive_index.re, expected);
            assert_relative_eq!(l.refractive_index.re * l.thickness_nm, 173.0, max_relative = 1e-15);
        }
        assert_relative_eq!(s.layers[0].thickness_nm, 77.93, epsilon = 5e-3);
        assert_relative_eq!(s.layers[1].thickness_nm, 122.70, epsilon = 5e-3);
        // 6 high + 5 low
        assert_relative_eq!(
            s.total_thickness(),
            6.0 * 692.0 / 8.88 + 5.0 * 692.0 / 5.64,
            max_relative = 1e-14
        );
        assert!((s.total_thickness() - 1081.0).abs() < 1.0);
    }

    #[test]
    fn degenerate_quarter_wave_builds() {
        let slab = build_quarter_wave_stack(600.0, 1.5, 1.5, 1, FirstLayer::High).unwrap();
        assert_eq!(slab.len(), 1);
        assert_relative_eq!(slab.layers[0].thickness_nm, 100.0, max_relative = 1e-15);

        let pair = build_quarter_wave_stack(692.0, 2.22, 1.41, 2, FirstLayer::High).unwrap();
        assert!((pair.total_thickness() - 200.63).abs() < 1e-2);

        let low_first = build_quarter_wave_stack(692.0, 2.22, 1.41, 3, FirstLayer::Low).unwrap();
        assert_eq!(low_first.layers[0].refractive_index.re, 1.41);
        assert_eq!(low_first.layers[1].refractive_index.re, 2.22);
    }

    #[test]
    fn quarter_wave_rejects_bad_fields() {
        let cases = [
            (
                build_quarter_wave_stack(0.0, 2.22, 1.41, 11, FirstLayer::High),
                "design_wavelength_nm",
            ),
            (
                build_quarter_wave_stack(692.0, -1.0, 1.41, 11, FirstLayer::High),
                "n_high",
            ),
            (
                build_quarter_wave_stack(692.0, 2.22, 0.0, 11, FirstLayer::High),
                "n_low",
            ),
            (
                build_quarter_wave_stack(692.0, 2.22, 1.41, 0, FirstLayer::High),
                "layer_count",
            ),
        ];
        for (res, field) in cases {
            match res {
                Err(Error::Validation { field: f, .. }) => assert_eq!(f, field),
                other => panic!("expected validation error on {field}, got {other:?}"),
            }
        }
    }

    #[test]
    fn perturbation_contract() {
        let s = mirror();
        assert_eq!(perturb_thicknesses(&s, 0.0, 99).unwrap(), s);
        let a = perturb_thicknesses(&s, 0.02, 1).unwrap();
        let b = perturb_thicknesses(&s, 0.02, 1).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, s);
        for (p, q) in a.layers.iter().zip(&s.layers) {
            assert_eq!(p.refractive_index, q.refractive_index);
            assert!(p.thickness_nm > 0.0);
        }
        assert!(perturb_thicknesses(&s, 0.5, 1).is_err());
        assert!(perturb_thicknesses(&s, -0.1, 1).is_err());
    }

    #[test]
    fn perturbation_floor_applies() {
        let s = mirror();
        let p = perturb_thicknesses(&s, 0.49, 7).unwrap();
        for (a, b) in p.layers.iter().zip(&s.layers) {
            assert!(a.thickness_nm >= THICKNESS_FLOOR_FRACTION * b.thickness_nm - 1e-12);
        }
    }

    #[test]
    fn perturbation_ensemble_mean() {
        let s = mirror();
        let nominal = s.total_thickness();
        let n = 10_000;
        let mean = (0..n)
            .map(|seed| perturb_thicknesses(&s, 0.02, seed).unwrap().total_thickness())
            .sum::<f64>()
            / n as f64;
        assert!((mean - nominal).abs() / nominal < 0.005, "mean {mean} vs {nominal}");
    }

    #[test]
    fn air_reference_lengths() {
        let s = mirror();
        let air = air_reference(&s);
        assert!(air.is_empty());
        assert_relative_eq!(air.traversal_length(), s.total_thickness());
        assert_eq!(air_reference(&air).traversal_length(), air.traversal_length());
        assert_eq!(air_reference(&LayerStack::default()).traversal_length(), 0.0);
        let slab = LayerStack::new(vec![Layer::lossless(1.5, 100.0).unwrap()]).unwrap();
        assert_eq!(air_reference(&slab).traversal_length(), 100.0);
    }

    #[test]
    fn layer_invariants() {
        assert!(Layer::lossless(1.5, -1.0).is_err());
        assert!(Layer::lossless(0.0, 1.0).is_err());
        assert!(Layer::new(Complex64::new(1.5, -0.1), 1.0).is_err());
        assert!(Layer::new(Complex64::new(1.5, 0.1), 1.0).is_ok());
        assert!(Layer::lossless(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn operating_point_validation() {
        assert!(OperatingPoint::new(702.0, 0.0, Polarization::P).is_ok());
        assert!(OperatingPoint::new(702.0, FRAC_PI_2, Polarization::P).is_err());
        assert!(OperatingPoint::new(-1.0, 0.0, Polarization::S).is_err());
        assert!(OperatingPoint::new(f64::INFINITY, 0.0, Polarization::S).is_err());
        assert!(OperatingPoint::new(702.0, f64::NAN, Polarization::S).is_err());
    }

    #[test]
    fn json_forms() {
        let short =
            r#"{ "quarter_wave": { "lambda0_nm": 692, "n_high": 2.22, "n_low": 1.41, "count": 11, "first": "high" } }"#;
        assert_eq!(LayerStack::from_json_str(short).unwrap().layers, mirror().layers);

        let explicit = r#"{ "incident_medium": 1.0, "exit_medium": {"re": 1.52, "im": 0.0},
                           "layers": [ {"n": 2.22, "d_nm": 77.93}, {"n": {"re": 1.41, "im": 0.001}, "d_nm": 122.7} ] }"#;
        let s = LayerStack::from_json_str(explicit).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.exit_medium, Complex64::new(1.52, 0.0));
        assert_eq!(s.layers[1].refractive_index, Complex64::new(1.41, 0.001));

        assert!(LayerStack::from_json_str(r#"{ "layers": [ {"n": 2.0, "d_nm": -3} ] }"#).is_err());
        assert!(LayerStack::from_json_str(r#"{ "nothing": 1 }"#).is_err());
    }

    #[test]
    fn json_round_trip_is_lossless() {
        let s = perturb_thicknesses(&mirror(), 0.03, 5).unwrap().with_label("perturbed");
        let back = LayerStack::from_json_str(&s.to_json_string().unwrap()).unwrap();
        assert_eq!(back, s);
        let air = air_reference(&s);
        assert_eq!(LayerStack::from_json_str(&air.to_json_string().unwrap()).unwrap(), air);
    }
}
