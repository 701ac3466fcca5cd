use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller broke an operation's precondition (shape mismatch, out-of-range k, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("parse error in {path} at byte {offset}: {msg}")]
    Parse {
        path: String,
        offset: usize,
        msg: String,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("no result: {0}")]
    NoResult(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad arguments rather than the environment.
    pub fn is_contract(&self) -> bool {
        matches!(
            self,
            Error::Contract(_) | Error::Diverged(_) | Error::NoResult(_)
        )
    }
}

macro_rules! contract {
    ($cond:expr, $($arg:tt)+) => {
        {
            let holds: bool = $cond;
            if !holds {
                return Err($crate::error::Error::Contract(format!($($arg)+)));
            }
        }
    };
}
pub(crate) use contract;
