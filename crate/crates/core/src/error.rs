use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid transform: {0}")]
    InvalidTransform(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("instance exceeds exact-solver scale bound: {0}")]
    ScaleExceeded(String),
    #[error("malformed control message: {0}")]
    Decode(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
