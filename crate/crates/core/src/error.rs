use thiserror::Error;

pub type Result<T> = std::result::Result<T, SmreError>;

#[derive(Debug, Error)]
pub enum SmreError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: expected {expected} entries, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("non-finite value at index {0}")]
    NonFinite(usize),

    #[error("empty constraint system")]
    EmptySystem,

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("{solver} did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("outer iteration {iteration}: {source}")]
    InnerSolver {
        iteration: usize,
        #[source]
        source: Box<SmreError>,
    },

    #[error("malformed quantile table: {0}")]
    Parse(String),

    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

pub(crate) fn invalid(msg: impl Into<String>) -> SmreError {
    SmreError::InvalidArgument(msg.into())
}
