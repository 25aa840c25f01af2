use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("non-finite entry in {context}")]
    NonFinite { context: &'static str },

    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("operator is not Hermitian (defect {defect:.3e})")]
    NotHermitian { defect: f64 },

    #[error("operator is not positive semidefinite (min eigenvalue {min_eigenvalue:.3e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("operator is not a state: {reason}")]
    NotState { reason: String },

    #[error("operator is not unitary (defect {defect:.3e})")]
    NotUnitary { defect: f64 },

    #[error("map is not a channel (trace-preservation defect {defect:.3e})")]
    NotChannel { defect: f64 },

    #[error("map is not trace non-increasing (excess {excess:.3e})")]
    NotTraceNonIncreasing { excess: f64 },

    #[error("empty Kraus set")]
    EmptyKraus,

    #[error("invalid observable: {0}")]
    InvalidObservable(String),

    #[error("invalid tolerance: eq_tol={eq_tol}, rank_tol={rank_tol}")]
    InvalidTolerance { eq_tol: f64, rank_tol: f64 },

    #[error("vectors are not orthogonal (overlap {overlap:.3e})")]
    NotOrthogonal { overlap: f64 },

    #[error("vector lies outside the required eigenspace (residual {residual:.3e})")]
    NotInEigenspace { residual: f64 },

    #[error("left and right eigenvalue-1 spaces differ: right {right}, left {left}")]
    NullSpaceMismatch { right: usize, left: usize },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("invalid descriptor: {0}")]
    Descriptor(String),
}

pub type Result<T> = std::result::Result<T, Error>;
