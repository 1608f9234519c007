use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Io(#[from] io::Error),

    /// The cause is part of the message rather than the error chain.
    #[error("{}: {cause}", path.display())]
    File { path: PathBuf, cause: io::Error },

    #[error("XES parse error at line {line}: {message}")]
    Xes { line: usize, message: String },

    #[error("CSV error at row {row}: {message}")]
    Csv { row: usize, message: String },

    #[error("unknown attribute key: {0}")]
    Key(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("label {label:?} is not in the registry ({context})")]
    UnknownLabel { label: String, context: String },

    #[error("external predictor failed: {0}")]
    PredictorFailed(String),

    #[error("external predictor protocol violation: {0}")]
    Protocol(String),

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub fn file(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::File {
            path: path.into(),
            cause: source,
        }
    }

    /// Whether the error stems from user input rather than a bug or environment fault.
    pub fn is_user_error(&self) -> bool {
        !matches!(self, Error::Internal(_))
    }
}
