use thiserror::Error;

/// Problems found while reading or validating an observed case series.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("input contains no data rows")]
    Empty,
    #[error("header mismatch: expected `{expected}`, found `{found}`")]
    Header { expected: String, found: String },
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("invalid series: {0}")]
    Series(String),
    #[error("io error: {0}")]
    Io(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("integration failed at t = {time}: {reason}")]
    Integration { time: f64, reason: String },
    #[error("objective is not finite at the starting point")]
    NonFiniteStart,
    #[error("estimate undefined: {0}")]
    Undefined(String),
    #[error("every fit in the L-plot failed")]
    AllFitsFailed,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn precondition<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Precondition(msg.into()))
}
