use thiserror::Error;

use crate::mlmc::MlmcResult;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{value} is outside [{lo}, {hi}]")]
    OutOfRange { value: f64, lo: f64, hi: f64 },

    #[error("covariance factorisation failed: {0}")]
    CovarianceFailure(String),

    #[error("unsupported scheme: {0}")]
    UnsupportedScheme(String),

    #[error("model does not provide the gradient required by {0}")]
    MissingGradient(&'static str),

    #[error("MLMC did not converge within {max_level} levels")]
    NoConvergence {
        max_level: usize,
        partial: Box<MlmcResult>,
    },

    #[error("reference oracle failed: {0}")]
    OracleFailure(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
