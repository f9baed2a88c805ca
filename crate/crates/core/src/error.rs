use thiserror::Error;

/// Errors raised by every module of the crate.
///
/// The variants map onto the CLI exit codes: preconditions exit with 2,
/// resource caps with 3 and numerical failures with 4.
#[derive(Debug, Error)]
pub enum Error {
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("resource cap exceeded: {what} needs {requested}, cap is {limit}")]
    ResourceCap {
        what: &'static str,
        requested: u128,
        limit: u128,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn pre(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    pub(crate) fn cap(what: &'static str, requested: u128, limit: u128) -> Self {
        Error::ResourceCap {
            what,
            requested,
            limit,
        }
    }

    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Precondition(_) | Error::Io(_) | Error::Json(_) | Error::Csv(_) => 2,
            Error::ResourceCap { .. } => 3,
            Error::Numerical(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
