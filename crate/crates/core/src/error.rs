use thiserror::Error;

use crate::optimizer::RunTrace;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input: dimension mismatch, unknown registry name, bad config value.
    #[error("configuration error: {0}")]
    Config(String),

    /// A numeric argument lies outside the domain of a formula (e.g. delta >= 1).
    #[error("domain error: {0}")]
    Domain(String),

    /// A parameter lies outside the regime in which a guarantee was proven.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Internal contract breach (out-of-range index and similar).
    #[error("logic error: {0}")]
    Logic(String),

    /// The private SGD loop hit its step cap before the fresh-set guard fired.
    #[error("run exceeded max_steps={max_steps} with {fresh} of {needed} fresh samples")]
    Overrun {
        max_steps: usize,
        fresh: usize,
        needed: usize,
        partial: Box<RunTrace>,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dim(what: &str, expected: usize, got: usize) -> Self {
        Error::Config(format!("{what}: dimension mismatch (expected {expected}, got {got})"))
    }
}
