use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised across the stream pipeline.
///
/// Variants fall into three families that callers (the CLI in particular)
/// map onto distinct exit codes: configuration, data, and numeric.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("stream format version {found:?} is not supported (expected {expected:?})")]
    Version { found: String, expected: String },

    #[error("digest mismatch: header says {expected}, body hashes to {actual}")]
    Digest { expected: String, actual: String },

    #[error("truncated stream: header declares {expected} batches, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }

    /// Coarse error family, used for exit-code mapping.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) => ErrorKind::Config,
            Error::Numeric(_) => ErrorKind::Numeric,
            _ => ErrorKind::Data,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numeric,
}
