use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix contains a non-finite entry")]
    NonFinite,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is not Hermitian (deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },
    #[error("eigenvalue {eigenvalue:.3e} is below the positivity floor {floor:.3e}")]
    NotPositiveDefinite { eigenvalue: f64, floor: f64 },
    #[error("iterative solver did not converge: {0}")]
    ConvergenceFailure(&'static str),
    #[error("invalid Schatten index {0}")]
    InvalidIndex(f64),
    #[error("index constraint violated: {0}")]
    IndexMismatch(String),
    #[error("indices must satisfy p < r < q, got p={p}, r={r}, q={q}")]
    IndexOrdering { p: f64, r: f64, q: f64 },
    #[error("input must be nonzero")]
    ZeroInput,
    #[error("density is not faithful: smallest eigenvalue {min_eigenvalue:.3e}")]
    NotFaithful { min_eigenvalue: f64 },
    #[error("density is not normalized: trace {trace}")]
    NotNormalized { trace: f64 },
    #[error("series budget exhausted: tail bound {tail_bound:.3e} after order {order}")]
    BudgetExhausted { order: usize, tail_bound: f64 },
    #[error("domain violation: {0}")]
    DomainViolation(String),
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("tail of the level sequence could not be certified: {0}")]
    TailNotCertified(String),
    #[error("common refinement exceeds the level cap of {cap}")]
    RefinementOverflow { cap: usize },
    #[error("invalid step function: {0}")]
    InvalidStepFunction(String),
}

pub type Result<T> = std::result::Result<T, Error>;
