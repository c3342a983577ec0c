//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the semcom library.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value violated an operation's preconditions.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A numerical procedure failed (singular system, eigensolver
    /// non-convergence, diverging training loss, ...).
    #[error("numeric failure: {0}")]
    NumericFailure(String),

    /// A binary or text input did not match its declared format. The offset
    /// is the byte position at which parsing gave up.
    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::NumericFailure(msg.into())
    }

    pub fn format(offset: u64, msg: impl Into<String>) -> Self {
        Error::Format {
            offset,
            message: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
