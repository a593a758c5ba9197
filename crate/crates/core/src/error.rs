use thiserror::Error;

/// Errors raised by the accountant.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A parameter set violates an invariant required by the requested bound.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// Numerical settings that cannot produce a meaningful answer.
    #[error("configuration error: {0}")]
    Config(String),

    /// The numerical error budget (e.g. truncated probability mass) was exceeded.
    #[error("accuracy budget exceeded: {0}")]
    Accuracy(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
