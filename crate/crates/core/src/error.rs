use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Everything that can go wrong inside the engine.
///
/// The variants line up with the error classes the service boundary reports:
/// parse/structure/contract failures are the caller's fault, `NotFound` and
/// `Conflict` concern handles, and `Unsupported` flags requests the engine
/// understands but cannot serve with the requested structure.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("structure error at row {row}: {message}")]
    Structure { row: usize, message: String },

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("{what} not found: {key}")]
    NotFound { what: &'static str, key: String },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("conflict: {0}")]
    Conflict(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn not_found(what: &'static str, key: impl ToString) -> Self {
        Error::NotFound {
            what,
            key: key.to_string(),
        }
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
}
