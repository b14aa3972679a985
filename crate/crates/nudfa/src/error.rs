use thiserror::Error;

/// Errors raised across the workbench.
///
/// `Refused` marks a hypothesis violation on otherwise well-formed input;
/// the CLI maps it to exit code 1. Everything else is a usage error.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown operation `{0}`")]
    UnknownOp(String),
    #[error("arity mismatch: expected {expected}, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("element {0} out of range")]
    OutOfRange(usize),
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error("refused: {0}")]
    Refused(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn refuse<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Refused(msg.into()))
}

pub(crate) fn malformed<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Malformed(msg.into()))
}
