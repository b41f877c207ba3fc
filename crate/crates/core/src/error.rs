//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration or argument values.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Dataset ingestion or content problems.
    #[error("data error: {0}")]
    Data(String),

    /// Tensor/parameter shape inconsistencies.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Failures during training or aggregation.
    #[error("training error: {0}")]
    Train(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Data(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
