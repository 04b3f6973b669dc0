use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Input violates a documented invariant.
    #[error("validation failed: {0}")]
    Validation(String),
    /// Two objects that must share a dimension do not.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    /// An iterative solver stopped without meeting its tolerance.
    #[error("solver did not converge: {0}")]
    NonConvergence(String),
    /// A numerical routine produced a non-finite value.
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("malformed document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Validation(_) => "validation",
            Error::Dimension { .. } => "dimension",
            Error::NonConvergence(_) => "non_convergence",
            Error::NonFinite(_) => "non_finite",
            Error::Json(_) => "json",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Validation(msg.into()))
}
