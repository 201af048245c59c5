//! Crate-wide error type.

use std::fmt;

/// Errors surfaced by the library.
///
/// `Profile` carries the key path of the offending field so the CLI can
/// report parse failures precisely (and exit with the usage code).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// A caller-supplied value is out of range or malformed.
    InvalidArgument(String),
    /// An operation was issued against state that does not allow it.
    InvalidState(String),
    /// A sampling-protocol precondition was violated by the caller.
    ProtocolViolation(String),
    /// A profile document failed to parse or validate. `path` names the
    /// section/key, e.g. `hardware.b_nic`.
    Profile { path: String, message: String },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::InvalidState(msg) => write!(f, "invalid state: {msg}"),
            Error::ProtocolViolation(msg) => write!(f, "protocol violation: {msg}"),
            Error::Profile { path, message } => write!(f, "profile error at `{path}`: {message}"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn profile(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Profile {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True for errors that should map to the usage/parse exit code.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Profile { .. })
    }
}
