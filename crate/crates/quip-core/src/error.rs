//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: shape mismatch between {lhs:?} and {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("{op}: unsupported operand shape {shape:?} ({reason})")]
    BadShape {
        op: &'static str,
        shape: Vec<usize>,
        reason: &'static str,
    },

    #[error("tensor data length {len} does not match shape {shape:?}")]
    LengthMismatch { shape: Vec<usize>, len: usize },

    #[error("backward requires a scalar loss, got shape {shape:?}")]
    LossNotScalar { shape: Vec<usize> },

    #[error("variable index {index} is not on this tape (length {len})")]
    NotOnTape { index: usize, len: usize },

    #[error("parameter `{name}` has a non-finite gradient entry at index {index}")]
    NonFiniteGradient { name: String, index: usize },

    #[error("duplicate parameter name `{0}`")]
    DuplicateParameter(String),

    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),

    #[error("pixel value {value} at index {index} is outside [0, 1]")]
    PixelOutOfRange { value: f64, index: usize },

    #[error("image {height}x{width} is smaller than one {n}x{n} patch")]
    ImageTooSmall {
        height: usize,
        width: usize,
        n: usize,
    },

    #[error("image {height}x{width} is smaller than the model window {window}")]
    ImageSmallerThanWindow {
        height: usize,
        width: usize,
        window: usize,
    },

    #[error("anchor ({row}, {col}) places a {n}x{n} patch outside a {height}x{width} image")]
    AnchorOutOfBounds {
        row: usize,
        col: usize,
        n: usize,
        height: usize,
        width: usize,
    },

    #[error("invalid patch geometry: {0}")]
    BadGeometry(String),

    #[error("duplicate anchor at ({row}, {col}): interaction distance would be zero")]
    DuplicateAnchor { row: usize, col: usize },

    #[error("group cardinality {got} does not match the model's expected {expected}")]
    GroupCardinalityMismatch { got: usize, expected: usize },

    #[error("eigendecomposition did not converge after {sweeps} sweeps (off-diagonal norm {off_diag:.3e})")]
    EigenNoConvergence { sweeps: usize, off_diag: f64 },

    #[error("invalid degradation: {0}")]
    BadDegradation(String),

    #[error("blur kernel is invalid: {0}")]
    BadKernel(String),

    #[error("resize to {height}x{width} would produce an empty image")]
    ResizeTooSmall { height: usize, width: usize },

    #[error("invalid training configuration: {0}")]
    BadTrainConfig(String),

    #[error("no usable training samples: {0}")]
    EmptyDataset(String),

    #[error("non-finite loss in batch {batch} of epoch {epoch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("not a DIVA1 model: {0}")]
    BadModelFile(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
