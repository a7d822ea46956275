use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        context: &'static str,
        expected: Vec<usize>,
        actual: Vec<usize>,
    },

    #[error("length mismatch in {context}: {left} vs {right}")]
    LengthMismatch {
        context: &'static str,
        left: usize,
        right: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid label value {value} at position {index}")]
    InvalidLabel { index: usize, value: i8 },

    #[error("index {index} out of range for {context} (size {size})")]
    IndexOutOfRange {
        context: &'static str,
        index: usize,
        size: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("backward called before forward in {0}")]
    BackwardBeforeForward(&'static str),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
