use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// The discretized input weight is not positive (b <= 0). Negate `b` and
    /// flip the decoded-bit convention to analyse the mirrored system.
    #[error("input weight w = {w} is not positive; negate b and the bit convention")]
    NonPositiveW { w: f64 },

    #[error("point {value} lies outside [{lo}, {hi}]")]
    OutOfDomain { value: f64, lo: f64, hi: f64 },

    #[error("measures live on different grids")]
    GridMismatch,

    #[error(
        "stationary iteration did not converge after {iterations} steps (last W1 gap {last_gap:e})"
    )]
    NotConverged { iterations: usize, last_gap: f64 },

    #[error("horizon K = {k} exceeds the exact-enumeration limit of {max}")]
    HorizonTooLarge { k: usize, max: usize },

    #[error("config error in `{key}`: {reason}")]
    Config { key: String, reason: String },
}

impl Error {
    /// Variant name, stable across releases.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter { .. } => "InvalidParameter",
            Error::NonPositiveW { .. } => "NonPositiveW",
            Error::OutOfDomain { .. } => "OutOfDomain",
            Error::GridMismatch => "GridMismatch",
            Error::NotConverged { .. } => "NotConverged",
            Error::HorizonTooLarge { .. } => "HorizonTooLarge",
            Error::Config { .. } => "Config",
        }
    }

    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
