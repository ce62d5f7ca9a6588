use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty data: {0}")]
    EmptyData(&'static str),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid label order: {0}")]
    InvalidPermutation(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("label count {labels} exceeds enumeration bound {max}")]
    TooManyLabels { labels: usize, max: usize },

    #[error("non-binary label {value:?} at row {row}, column {column}")]
    NonBinaryLabel { row: usize, column: usize, value: String },

    #[error("ragged CSV: row {row} has {got} fields, expected {expected}")]
    RaggedRow { row: usize, expected: usize, got: usize },

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse { row: usize, column: usize, message: String },

    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by the input data rather than by the caller's
    /// configuration or by an internal fault.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::EmptyData(_)
                | Error::DimensionMismatch { .. }
                | Error::NonFinite(_)
                | Error::NonBinaryLabel { .. }
                | Error::RaggedRow { .. }
                | Error::Parse { .. }
                | Error::FileNotFound(_)
                | Error::Csv(_)
                | Error::Json(_)
                | Error::Io(_)
        )
    }
}
