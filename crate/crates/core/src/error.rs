use alloc::string::String;

/// Errors raised by the estimators and density constructions.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A sample or ensemble that carries no spread (constant column, identical laws).
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    /// Second-level analysis cannot proceed for one input (0-based index).
    #[error("degenerate second-level analysis for input {}: {reason}", input + 1)]
    DegenerateInput { input: usize, reason: String },

    /// An estimate came out unusable (negative normaliser, NaN), with the
    /// per-input variance of the likelihood-ratio factors attached.
    #[error("degenerate estimate: {reason}")]
    DegenerateEstimate { reason: String, weight_variances: alloc::vec::Vec<f64> },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("support mismatch: {0}")]
    SupportMismatch(String),
}

pub type Result<T> = core::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::DegenerateSample(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    /// True for errors that stem from the data (degenerate samples, estimates
    /// or quadrature) rather than from invalid arguments.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::DegenerateSample(_)
                | Error::DegenerateInput { .. }
                | Error::DegenerateEstimate { .. }
                | Error::Numerical(_)
        )
    }
}
