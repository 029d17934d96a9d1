use thiserror::Error;

/// Errors raised by the analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite entry in {0}")]
    NonFinite(String),

    #[error("matrix is not positive semidefinite: smallest eigenvalue {min_eigenvalue:e}")]
    NotPsd { min_eigenvalue: f64 },

    #[error("matrix is numerically singular (condition number {condition:e})")]
    Conditioning { condition: f64 },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("unsupported regime: {0}")]
    Unsupported(String),

    #[error("inconsistent input: {0}")]
    Inconsistent(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("ambiguous spectral classification: {0}")]
    Ambiguous(String),

    #[error("eigensolver failed: {0}")]
    Solver(String),

    #[error("integrator step size underflow at t = {t:e} (step {step:e}); the problem is stiff, use a smaller horizon or a lower loss parameter")]
    Stiff { t: f64, step: f64 },

    #[error("insufficient sampling: {0}")]
    Sampling(String),

    #[error("theorem not applicable: {0}")]
    Inapplicable(String),

    #[error("mode tracking failed near beta = {beta:e}: {reason}")]
    Tracking { beta: f64, reason: String },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("malformed input: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
