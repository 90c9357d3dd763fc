use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path} at row {row}: {message}")]
    Parse {
        path: PathBuf,
        row: usize,
        message: String,
    },

    #[error("length mismatch in {path}: {message}")]
    LengthMismatch { path: PathBuf, message: String },

    #[error("unsupported rate: {0}")]
    UnsupportedRate(String),

    #[error("window too long for record {record}: {len} samples < window {window}")]
    WindowTooLong {
        record: String,
        len: usize,
        window: usize,
    },

    #[error("non-finite feature value in {sample}: {feature}")]
    NonFinite { sample: String, feature: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unknown label: {0}")]
    UnknownLabel(String),

    #[error("bearings missing from split table: {}", .0.join(", "))]
    MissingBearings(Vec<String>),

    #[error("dimension mismatch: expected {expected} columns, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
