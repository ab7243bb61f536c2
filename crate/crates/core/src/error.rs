//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("image dimensions {height}x{width} not divisible by 2^{levels}")]
    DimensionNotDivisible {
        height: usize,
        width: usize,
        levels: u32,
    },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("coefficient layout mismatch: {0}")]
    LayoutMismatch(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("model file format error: {0}")]
    ModelFormat(String),

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("predictor failure: {0}")]
    Predictor(String),

    #[error("corpus construction failed: {0}")]
    Corpus(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
