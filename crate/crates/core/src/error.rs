use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("order grids do not match")]
    GridMismatch,

    #[error("ballot set is empty")]
    EmptyBallots,

    #[error("invalid ballot: {0}")]
    InvalidBallot(String),

    #[error("ballot domain too large for exhaustive search: {0}")]
    DomainTooLarge(String),

    #[error("malformed input at line {line}: {message}")]
    Malformed { line: u64, message: String },

    #[error("corrupt ledger: {0}")]
    CorruptLedger(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
