use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid group: {0}")]
    InvalidGroup(String),
    #[error("element index {index} out of range for group of size {size}")]
    OutOfRange { index: usize, size: usize },
    #[error("group mismatch: {0} vs {1}")]
    GroupMismatch(String, String),
    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("size cap exceeded: {0}")]
    CapExceeded(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("algorithm gave up: {0}")]
    Exhausted(String),
}

pub type Result<T> = std::result::Result<T, Error>;
