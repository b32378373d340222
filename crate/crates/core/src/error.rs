use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unsupported space: {0}")]
    UnsupportedSpace(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("numerical divergence: {0}")]
    NumericalDivergence(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("insufficient data: need {needed}, have {available}")]
    InsufficientData { needed: usize, available: usize },

    /// Failure reported by an externally hosted environment, text preserved verbatim.
    #[error("remote environment error: {0}")]
    Remote(String),

    #[error("connection error: {0}")]
    Connection(String),
}

impl Error {
    pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
        if expected == got {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected, got })
        }
    }
}
