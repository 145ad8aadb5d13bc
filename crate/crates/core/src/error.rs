//! Error type shared by all modules.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid truncation: {0}")]
    InvalidTruncation(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not Hermitian (relative residual {residual:.3e})")]
    NonHermitian { residual: f64 },

    #[error("parameters are off the SUSY line (residual {residual:.3e}, tolerance {tol:.3e})")]
    OffSusyLine { residual: f64, tol: f64 },

    #[error("truncation too small: {0}")]
    TruncationTooSmall(String),

    #[error("lattice dimension {dim} exceeds the guard {max}; lower n_max_site")]
    DimensionOverflow { dim: usize, max: usize },

    #[error("kernel detection is ill-conditioned: {0}")]
    IllConditionedKernel(String),

    #[error("spectrum must be sorted ascending")]
    UnsortedSpectrum,

    #[error(
        "zero cluster of the Liouvillian is ambiguous: {0}"
    )]
    AmbiguousZeroCluster(String),

    #[error(
        "biorthonormalization of the zero eigenspace failed (condition number {condition:.3e})"
    )]
    DefectiveZeroCluster { condition: f64 },

    #[error("level {level} is disconnected: no downward rate feeds it")]
    DisconnectedLevel { level: usize },

    #[error("propagation methods disagree (max difference {max_diff:.3e} > {tol:.3e})")]
    MethodDisagreement { max_diff: f64, tol: f64 },

    #[error("uninformative initial state: {0}")]
    UninformativeInitialState(String),

    #[error("eigendecomposition failed: {0}")]
    EigenFailure(String),

    #[error("invariant violated: {0}")]
    InvariantViolation(String),
}
