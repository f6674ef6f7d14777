use std::path::PathBuf;

use crate::model::ZoneId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    /// A configuration or input failed validation before any work started.
    #[error("invalid {key}: {message}")]
    Config { key: String, message: String },

    #[error("city map: {0}")]
    InvalidMap(String),

    #[error("unknown zone {0}")]
    UnknownZone(ZoneId),

    #[error("{what} out of range: {detail}")]
    OutOfRange { what: &'static str, detail: String },

    #[error("contract violation: {0}")]
    Contract(String),

    /// A simulation invariant did not hold; always a bug in the engine.
    #[error("invariant breach at cycle {cycle}: {message}")]
    Invariant { cycle: usize, message: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by user input rather than by the run itself.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. } | Error::Config { .. } | Error::InvalidMap(_) | Error::UnknownZone(_)
        )
    }
}
