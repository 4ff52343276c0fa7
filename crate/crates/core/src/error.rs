use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("grid {width}x{height} does not hold {len} labels")]
    InvalidDimensions { width: usize, height: usize, len: usize },
    #[error("pixel count mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("label {label} at pixel {index} is outside [0, {num_labels})")]
    LabelOutOfRange { index: usize, label: u32, num_labels: u32 },
    #[error("pixel index {index} out of range for {len} pixels")]
    PixelOutOfRange { index: usize, len: usize },
    #[error("inconsistent constraints: pair ({0}, {1}) is both must-linked and cannot-linked")]
    InconsistentConstraints(usize, usize),
    #[error("constraint pair ({0}, {0}) links a pixel to itself")]
    SelfPair(usize),
    #[error("ensemble must contain at least one member")]
    EmptyEnsemble,
    #[error("degenerate input: {0}")]
    Degenerate(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
}
