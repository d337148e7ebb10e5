use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum DpiError {
    /// Malformed input: bad dimensions, probabilities that do not normalize,
    /// out-of-range parameters.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An iterative solver hit its iteration cap before reaching tolerance.
    #[error("{what} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    /// A numerical operation failed (singular matrix, non-finite value, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, DpiError>;

impl DpiError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        DpiError::InvalidArgument(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        DpiError::Numerical(msg.into())
    }
}
