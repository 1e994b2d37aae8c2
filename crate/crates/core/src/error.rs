//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("singular transform: {0}")]
    SingularTransform(String),

    #[error("unsupported family: {0}")]
    UnsupportedFamily(String),

    #[error("example budget exceeded: drew {draws} with budget {budget}")]
    BudgetExceeded { draws: usize, budget: usize },

    #[error("inconclusive: {0}")]
    Inconclusive(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
