use thiserror::Error;

use crate::monotonic::EpState;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("insufficient data: need at least {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    /// EP could not keep the approximate posterior positive definite. The last
    /// state that factorized successfully is carried along.
    #[error("expectation propagation failed: {reason}")]
    EpFailure {
        reason: String,
        last_stable: Option<Box<EpState>>,
    },

    #[error("evaluator failed: {0}")]
    Evaluator(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn input_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Input(msg.into()))
}
