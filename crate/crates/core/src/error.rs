//! Crate-wide error type.

use std::path::PathBuf;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed raster or CSV content. `line` and `column` are 1-based;
    /// `column` is the token position within the line (0 = whole line).
    #[error("parse error in {path} at line {line}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("grid geometry mismatch: {0}")]
    GeometryMismatch(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("flow routing error: {0}")]
    Routing(String),

    #[error("model fit error: {0}")]
    Fit(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn parse(
        path: impl Into<PathBuf>,
        line: usize,
        column: usize,
        message: impl Into<String>,
    ) -> Self {
        Error::Parse { path: path.into(), line, column, message: message.into() }
    }
}
