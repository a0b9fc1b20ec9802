use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid quantum numbers: {0}")]
    InvalidQuantumNumbers(String),

    #[error("unphysical spin path: {0}")]
    UnphysicalPath(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
