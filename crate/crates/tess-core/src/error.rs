use alloc::vec::Vec;
use core::fmt;

/// Errors surfaced by the numeric layers of the engine.
#[derive(Debug, Clone, PartialEq)]
pub enum CoreError {
    /// Tensor shapes do not line up for the requested operation.
    ShapeMismatch { expected: Vec<usize>, got: Vec<usize> },
    /// Flat lengths do not line up.
    LenMismatch { expected: usize, got: usize },
    /// A value that must be finite is NaN or infinite.
    NonFinite { context: &'static str },
    /// A parameter is outside its documented domain.
    InvalidParam { context: &'static str },
    /// The exact-gradient oracle refuses nets beyond its documented limits.
    OracleLimit { neurons: usize, steps: usize },
    /// A byte stream does not follow the documented container layout.
    Format { offset: u64, context: &'static str },
}

pub type CoreResult<T> = Result<T, CoreError>;

impl fmt::Display for CoreError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoreError::ShapeMismatch { expected, got } => {
                write!(f, "shape mismatch: expected {:?}, got {:?}", expected, got)
            }
            CoreError::LenMismatch { expected, got } => {
                write!(f, "length mismatch: expected {}, got {}", expected, got)
            }
            CoreError::NonFinite { context } => {
                write!(f, "non-finite value in {}", context)
            }
            CoreError::InvalidParam { context } => {
                write!(f, "invalid parameter: {}", context)
            }
            CoreError::OracleLimit { neurons, steps } => write!(
                f,
                "oracle refuses {} neurons over {} steps (dense nets up to 64 neurons, 10 steps)",
                neurons, steps
            ),
            CoreError::Format { offset, context } => {
                write!(f, "format error at byte {}: {}", offset, context)
            }
        }
    }
}
