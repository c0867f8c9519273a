use thiserror::Error;

/// Errors reported by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("index {index} out of range (len {len})")]
    OutOfRange { index: usize, len: usize },

    #[error("nesting violation: {0}")]
    Nesting(String),

    /// Numerically degenerate input (identical points, isotropic covariance, zero-norm axis).
    #[error("degenerate: {0}")]
    Degenerate(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("line {line}: {message}")]
    Row { line: u64, message: String },

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    /// True for numerical degeneracy, as opposed to malformed input.
    pub fn is_degenerate(&self) -> bool {
        matches!(self, Error::Degenerate(_) | Error::NoConvergence(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
