use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A function produced a non-finite value.
    #[error("non-finite value {value} at {location}")]
    NonFinite { location: String, value: f64 },

    /// The caller violated a precondition.
    #[error("invalid input: {0}")]
    Usage(String),

    /// An iteration did not reach its tolerance.
    #[error("no convergence after {iterations} iterations (last residual {last:.3e}, tolerance {tolerance:.1e})")]
    Convergence {
        iterations: usize,
        last: f64,
        tolerance: f64,
        history: Vec<f64>,
    },

    /// `exp(f)` does not fit in an f64.
    #[error("exp(f) overflows (max f = {max_value}); rescale the potential or audit its sup bound")]
    Overflow { max_value: f64 },

    /// A residual check failed.
    #[error("{what} residual {residual:.3e} at {location} exceeds tolerance {tolerance:.1e}")]
    Residual {
        what: String,
        residual: f64,
        tolerance: f64,
        location: String,
    },

    /// The requested computation is outside what is supported.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// The computation has no meaningful answer for the given inputs.
    #[error("degenerate: {0}")]
    Degenerate(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    /// Residual history carried by a convergence failure, if any.
    pub fn history(&self) -> Option<&[f64]> {
        match self {
            Error::Convergence { history, .. } => Some(history),
            _ => None,
        }
    }
}

pub(crate) fn check_finite(value: f64, location: impl FnOnce() -> String) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite {
            location: location(),
            value,
        })
    }
}
