use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("ingestion error: {0}")]
    Ingestion(String),
    #[error("split error: {0}")]
    Split(String),
    #[error("stream error: {0}")]
    Stream(String),
    #[error("image values outside [0,1]: {0}")]
    PixelRange(String),
}
