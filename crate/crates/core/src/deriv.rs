//! Central differences cross-checked against Richardson extrapolation.
//!
//! The caller supplies the symmetric difference `f(x + h) - f(x - h)` rather
//! than `f` itself, so phase differences can be taken as `arg(t₊/t₋)` without
//! any branch-cut bookkeeping.

use serde::{Deserialize, Serialize};

/// Relative agreement required between the step-`h` central difference and
/// the `(h, h/2)` Richardson value.
pub const RELATIVE_TOLERANCE: f64 = 1e-6;

/// Absolute slack for derivatives that pass through zero, in the units of
/// the derivative.
pub const ABSOLUTE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Derivative {
    /// Richardson-extrapolated estimate; the value callers should use.
    pub value: f64,
    /// Plain central difference at `step`.
    pub central: f64,
    pub step: f64,
    pub converged: bool,
}

impl Derivative {
    /// `|central - value|` relative to `|value|`.
    pub fn relative_discrepancy(&self) -> f64 {
        let d = (self.central - self.value).abs();
        if self.value == 0.0 {
            d
        } else {
            d / self.value.abs()
        }
    }

    pub fn passes_cross_check(&self) -> bool {
        (self.central - self.value).abs() <= RELATIVE_TOLERANCE * self.value.abs() + ABSOLUTE_TOLERANCE
    }
}

/// Derivative from a symmetric-difference closure `diff(h) = f(x+h) - f(x-h)`.
///
/// Starts at `h0` and halves the step until the central difference agrees
/// with the Richardson extrapolation, giving up (with `converged = false`)
/// once the step would fall below `h_floor`.
pub fn checked_derivative<F>(diff: F, h0: f64, h_floor: f64) -> Derivative
where
    F: Fn(f64) -> f64,
{
    let mut h = h0;
    let mut d_h = diff(h) / (2.0 * h);
    loop {
        let d_half = diff(0.5 * h) / h;
        let richardson = (4.0 * d_half - d_h) / 3.0;
        let estimate = Derivative {
            value: richardson,
            central: d_h,
            step: h,
            converged: true,
        };
        if estimate.passes_cross_check() {
            return estimate;
        }
        if 0.5 * h < h_floor {
            return Derivative {
                converged: false,
                ..estimate
            };
        }
        h *= 0.5;
        d_h = d_half;
    }
}
