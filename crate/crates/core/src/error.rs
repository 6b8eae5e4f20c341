use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("unknown unit `{unit}` for {quantity}")]
    UnknownUnit { quantity: &'static str, unit: String },

    #[error("integration failed: {0}")]
    Integration(String),

    #[error("state not normalized: total weight {0}")]
    NotNormalized(f64),

    #[error("operators act on different spin sites")]
    MixedSites,

    #[error("complex time {re} + {im}i lies outside the thermal strip")]
    OutsideStrip { re: f64, im: f64 },

    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("spectrum has {0} resolved peaks; refusing a single-line fit")]
    Multimodal(usize),

    #[error("{0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

pub(crate) fn require_finite(name: &'static str, x: f64) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(invalid(name, format!("must be finite, got {x}")))
    }
}

pub(crate) fn require_positive(name: &'static str, x: f64) -> Result<f64> {
    if x.is_finite() && x > 0.0 {
        Ok(x)
    } else {
        Err(invalid(name, format!("must be positive and finite, got {x}")))
    }
}
