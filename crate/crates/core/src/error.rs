use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("truncated input: expected {expected} bytes, found {found}")]
    Length { expected: u64, found: u64 },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("validation error at line {line}: {message}")]
    ValidationAt { line: usize, message: String },

    #[error("non-finite value in row {row}, column {col}")]
    NonFiniteRow { row: usize, col: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("non-finite loss at step {step} (batch ids {batch_ids:?})")]
    NonFiniteLoss { step: usize, batch_ids: Vec<u32> },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by malformed or inconsistent inputs, as opposed
    /// to runtime failures (I/O, diverging training).
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::Io { .. } | Error::NonFiniteLoss { .. })
    }
}
