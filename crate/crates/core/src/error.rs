use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Why a maximum pseudo-likelihood fit failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimationFailure {
    /// The change-statistic design matrix is not of full column rank.
    RankDeficient,
    /// The responses are (quasi-)separated and the estimate diverges.
    Separation,
    /// Newton iterations exhausted without meeting the score tolerance.
    NoConvergence,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("estimation failed ({kind:?}): {detail}")]
    Estimation { kind: EstimationFailure, detail: String },

    #[error("exact enumeration refused for n = {n} (limit {max})")]
    EnumerationTooLarge { n: usize, max: usize },

    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
