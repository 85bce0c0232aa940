use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed CSV content. `line` is the 1-based line in the file.
    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    /// Forest document violates the canonical schema; `path` is a JSON path.
    #[error("invalid forest document at {path}: {message}")]
    Validation { path: String, message: String },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("model/dataset mismatch: {0}")]
    Mismatch(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("filter selected no rules")]
    EmptyView,

    #[error("invalid ordering: {0}")]
    Ordering(String),

    #[error("stale change vector: {0}")]
    StaleChange(String),

    /// A broken internal invariant. Never expected on valid inputs.
    #[error("internal invariant violated: {0}")]
    Defect(String),
}

impl Error {
    pub(crate) fn validation(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            path: path.into(),
            message: message.into(),
        }
    }
}
