use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("EDF parse error ({field}): {reason}")]
    Edf { field: String, reason: String },

    #[error("annotation parse error at line {line}: {reason}")]
    Annotation { line: usize, reason: String },

    #[error("CSV error: {0}")]
    Csv(String),

    #[error("tree parse error at byte {pos}: {reason}")]
    TreeParse { pos: usize, reason: String },

    /// A value or shape violated an operation's precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("{0}")]
    Runtime(String),
}

/// Coarse error category, used by the CLI to choose an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Runtime,
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) => ErrorKind::Config,
            Error::Edf { .. }
            | Error::Annotation { .. }
            | Error::Csv(_)
            | Error::TreeParse { .. }
            | Error::InvalidInput(_)
            | Error::Io { .. }
            | Error::Json(_) => ErrorKind::Data,
            Error::Runtime(_) => ErrorKind::Runtime,
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}
