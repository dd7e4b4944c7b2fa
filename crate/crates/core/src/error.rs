use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("kernel aliasing: {0}")]
    Aliasing(String),

    #[error("correlation family not normalized: k(empty) = {0}, expected 1")]
    Normalization(f64),

    #[error("numerical divergence at step {step} (t = {time})")]
    Divergence { step: usize, time: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
