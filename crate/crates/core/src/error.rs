use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = ImeError> = std::result::Result<T, E>;

/// Where in an input file a parse error was detected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Byte(u64),
    Line(usize),
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Byte(offset) => write!(f, "byte offset {offset}"),
            Location::Line(line) => write!(f, "line {line}"),
        }
    }
}

#[derive(Debug, Error)]
pub enum ImeError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path} at {location}: {message}")]
    Parse {
        path: String,
        location: Location,
        message: String,
    },

    #[error("unsupported file version {found} (this build reads version {expected})")]
    UnsupportedVersion { found: u8, expected: u8 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("graph disconnected beyond correction: {0}")]
    Disconnected(String),

    #[error("query {query}: {message}")]
    Reference { query: String, message: String },

    /// A stored artifact was produced from different inputs than supplied.
    #[error("fingerprint mismatch: {0}")]
    FingerprintMismatch(String),
}

impl ImeError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        ImeError::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        ImeError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl fmt::Display, location: Location, msg: impl Into<String>) -> Self {
        ImeError::Parse {
            path: path.to_string(),
            location,
            message: msg.into(),
        }
    }

    /// Stable machine-readable category, one token per error family.
    pub fn category(&self) -> &'static str {
        match self {
            ImeError::InvalidArgument(_) => "invalid-argument",
            ImeError::Io { .. } => "io",
            ImeError::Parse { .. } | ImeError::UnsupportedVersion { .. } => "parse",
            ImeError::Numerical(_) | ImeError::Disconnected(_) => "numerical",
            ImeError::Reference { .. } | ImeError::FingerprintMismatch(_) => "reference",
        }
    }
}
