//! Crate-wide error type with a stable mapping to process exit codes.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Tensor shape/dimension violations (mismatched operands, bad axes).
    #[error("shape error: {0}")]
    Shape(String),

    /// Tape misuse: backward twice, loss from a different tape, non-scalar loss.
    #[error("tape state error: {0}")]
    State(String),

    /// Malformed text content (annotations, manifests, image headers).
    #[error("parse error: {0}")]
    Parse(String),

    /// Invalid or inconsistent configuration values.
    #[error("config error: {0}")]
    Config(String),

    /// Filesystem failure with the offending path.
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    /// Checkpoint encode/decode failures.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    /// Training-time failures (non-finite values, empty splits).
    #[error("training error: {0}")]
    Train(String),

    /// Dataset-level problems (missing entries, class table mismatches).
    #[error("data error: {0}")]
    Data(String),

    /// Command-line misuse.
    #[error("{0}")]
    Usage(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 1 usage, 2 bad input data, 3 runtime.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 1,
            Error::Parse(_)
            | Error::Config(_)
            | Error::Io { .. }
            | Error::Checkpoint(_)
            | Error::Data(_) => 2,
            Error::Shape(_) | Error::State(_) | Error::Train(_) => 3,
        }
    }
}
