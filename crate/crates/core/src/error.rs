use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("row {row} ({timestamp}): invalid {field}: {message}")]
    InvalidRecord {
        row: usize,
        timestamp: String,
        field: &'static str,
        message: String,
    },

    #[error("duplicate timestamp {0}")]
    DuplicateTimestamp(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("empty {0} split")]
    EmptySplit(&'static str),

    #[error("feature `{0}` is constant over the training split")]
    ConstantFeature(String),

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("non-finite parameter after optimizer step {0}")]
    NonFiniteParameter(u64),

    #[error("metric error: {0}")]
    Metric(String),

    #[error("misaligned datasets: {0}")]
    Misaligned(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
