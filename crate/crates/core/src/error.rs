use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("marginal mismatch: total masses differ by {0:.3e}")]
    MarginalMismatch(f64),

    #[error("size cap exceeded: {what} has {size} points, cap is {cap}")]
    SizeCap { what: &'static str, size: usize, cap: usize },

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("solver did not converge: {solver} (residual {residual:.3e})")]
    NoConvergence { solver: &'static str, residual: f64 },

    #[error("linear programming failure: {0}")]
    Lp(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
