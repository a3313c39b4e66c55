use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid {field}: {message}")]
    Validation { field: String, message: String },

    #[error("opaque point: phase derivative undefined (transmittance {transmittance:.3e})")]
    OpaquePoint { transmittance: f64 },

    #[error("semiclassical time undefined outside gap")]
    OutsideGap,

    #[error("transmission table under-sampled")]
    UnderSampled,

    #[error("dip not bracketed")]
    DipNotBracketed,

    #[error("numerical derivative did not converge for {quantity}")]
    DerivativeUnconverged { quantity: String },

    #[error("{0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn validation(field: &str, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.to_string(),
            message: message.into(),
        }
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::OpaquePoint { .. }
                | Error::OutsideGap
                | Error::UnderSampled
                | Error::DipNotBracketed
                | Error::DerivativeUnconverged { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

/// Rejects NaN and infinities.
pub(crate) fn require_finite(field: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::validation(field, format!("must be finite, got {value}")))
    }
}

pub(crate) fn require_positive(field: &str, value: f64) -> Result<()> {
    require_finite(field, value)?;
    if value > 0.0 {
        Ok(())
    } else {
        Err(Error::validation(field, format!("must be > 0, got {value}")))
    }
}
