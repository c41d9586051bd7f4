use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("invalid `{field}`: {message}")]
    Invariant { field: String, message: String },

    #[error("disconnected level-1 graph")]
    Disconnected,

    #[error("singular system: {0}")]
    Singular(String),

    #[error("not a harmonic structure: trace deviates from H0 by {0:e}")]
    NotHarmonic(f64),

    #[error("iteration did not converge: {0}")]
    NoConvergence(String),

    #[error("rank deficient: {0}")]
    RankDeficient(String),

    #[error("sigma = {0} is a critical order; the norm is not defined there")]
    CriticalOrder(f64),

    #[error("sigma = {sigma} outside the validity window of {what}")]
    OutOfWindow { sigma: f64, what: String },

    #[error("no transition inside the sigma grid: {0}")]
    NoTransition(String),

    #[error("problem too large: {0}")]
    TooLarge(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invariant(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Invariant { field: field.into(), message: message.into() }
    }

    pub(crate) fn arg(message: impl Into<String>) -> Self {
        Error::InvalidArgument(message.into())
    }
}
