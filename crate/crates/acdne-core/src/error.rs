//! Error type shared by every module of the crate.

use std::path::PathBuf;
use thiserror::Error;

/// All failure modes surfaced by the library.
///
/// `Parse` and `Io` carry the offending path so callers can report it
/// without extra bookkeeping; `Parse` additionally carries the 1-based
/// line number.
#[derive(Debug, Error)]
pub enum CoreError {
    /// A text input file violated its format.
    #[error("{}:{line}: {msg}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    /// Structurally well-formed data violated a semantic requirement
    /// (shape mismatch, index out of range, unaligned pair, ...).
    #[error("invalid input: {0}")]
    Validation(String),

    /// A caller-supplied parameter is outside its documented domain.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A computation produced NaN or infinity.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// An internal API was driven outside its contract, e.g. a backward
    /// pass fed a cache from a different forward pass.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Reading or writing a file failed below the format layer.
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CoreError {
    pub fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        CoreError::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CoreError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, CoreError>;
