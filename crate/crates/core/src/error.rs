use thiserror::Error;

/// Errors raised by the cipher, container and analysis layers.
#[derive(Debug, Error)]
pub enum PuzzleError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An internal invariant did not hold (a bug, not bad input).
    #[error("internal consistency error: {0}")]
    Internal(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("I/O error at byte offset {offset}: {source}")]
    Io {
        offset: u64,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, PuzzleError>;

pub(crate) fn invalid(msg: impl Into<String>) -> PuzzleError {
    PuzzleError::InvalidArgument(msg.into())
}

pub(crate) fn internal(msg: impl Into<String>) -> PuzzleError {
    PuzzleError::Internal(msg.into())
}
