//! Error type shared across the toolkit.

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
///
/// The variants are grouped so the CLI can map them onto exit codes:
/// configuration/data problems exit with 2, internal invariant violations
/// with 3.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value violates an invariant.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Input data is structurally unusable for the requested operation.
    #[error("{0}")]
    Data(String),

    /// A file or byte stream could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),

    /// Underlying I/O failure.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// A condition that should be impossible if the library is correct.
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Exit code the CLI should use for this error (see the io module docs).
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Internal(_) => 3,
            _ => 2,
        }
    }
}
