use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid input: {0}")]
    Input(String),

    /// Malformed record in a tabular input; `line` is 1-based.
    #[error("invalid input at line {line}: {message}")]
    Row { line: u64, message: String },

    #[error("assembly error: missing cells {0:?}")]
    MissingCells(Vec<(u64, u64)>),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn config<S: Into<String>>(msg: S) -> Error {
    Error::Config(msg.into())
}

pub(crate) fn contract<S: Into<String>>(msg: S) -> Error {
    Error::Contract(msg.into())
}
