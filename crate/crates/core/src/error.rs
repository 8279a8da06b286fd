use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input text is not in the expected alphabet or syntax.
    #[error("input format error: {0}")]
    InputFormat(String),

    /// Arguments are well-formed but violate an operation's preconditions.
    #[error("domain error: {0}")]
    Domain(String),

    /// A delimited data file violates a type invariant at a known cell.
    #[error("ingestion error at row {row} ({id}), column {column}: {message}")]
    Ingestion {
        row: usize,
        id: String,
        column: String,
        message: String,
    },

    #[error("model format error: {0}")]
    ModelFormat(String),

    #[error("config error: {0}")]
    Config(String),

    /// Operation is not valid for the current state of the data (e.g. salting twice).
    #[error("state error: {0}")]
    State(String),

    #[error("key fingerprint mismatch")]
    KeyMismatch,

    /// Exhaustive search refused because the instance is too large.
    #[error("guard error: {0}")]
    Guard(String),

    #[error("{cell}: {source}")]
    Cell {
        cell: String,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True when the failure came from the filesystem rather than the data.
    pub fn is_io(&self) -> bool {
        match self {
            Error::Io { .. } => true,
            Error::Cell { source, .. } => source.is_io(),
            _ => false,
        }
    }
}
