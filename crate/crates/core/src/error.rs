use thiserror::Error;

/// Errors raised by the workbench.
///
/// Verdict-style operations (symmetry and independence checks, faithfulness
/// diagnostics) encode a failed property in their return value; only
/// structural problems, resource limits and violated preconditions surface
/// here.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("algebra mismatch: expected blocks {expected:?}, found {found:?}")]
    AlgebraMismatch { expected: Vec<usize>, found: Vec<usize> },

    #[error("invalid algebra: {0}")]
    InvalidAlgebra(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("resource limit exceeded: {what} needs {size}, cap is {cap}")]
    Resource { what: String, size: u128, cap: u128 },

    #[error("window too small for {context}: needs {required}, model window is {available}")]
    Window {
        context: String,
        required: usize,
        available: usize,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("conditioning error: {0}")]
    Conditioning(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("internal error: {0}")]
    Internal(String),

    #[error("configuration error at {}: {message}", if pointer.is_empty() { "/" } else { pointer.as_str() })]
    Config { pointer: String, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}
