use thiserror::Error;

/// Errors produced by the library.
///
/// The CLI maps these onto process exit codes: validation and domain errors
/// are input errors, resource errors are cap violations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Operands do not fit together (shape or instance mismatch, bad factor index).
    #[error("domain error: {0}")]
    Domain(String),

    /// A payload violates the invariants of its instance.
    #[error("validation error at {location}: {message}")]
    Validation { location: String, message: String },

    /// An explicit oracle or enumeration cap would be exceeded.
    #[error("resource cap exceeded: {what} needs {requested}, cap is {cap}")]
    Resource {
        what: String,
        requested: usize,
        cap: usize,
    },

    /// The operation is not available for this instance.
    #[error("unsupported instance: {0}")]
    Unsupported(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn validation(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            location: location.into(),
            message: message.into(),
        }
    }

    /// Prefix the location of a validation error, e.g. with a time index.
    pub fn at(self, prefix: impl std::fmt::Display) -> Self {
        match self {
            Error::Validation { location, message } => Error::Validation {
                location: format!("{prefix}: {location}"),
                message,
            },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
