use thiserror::Error;

/// Library-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("operator is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("operator is not positive semidefinite (min eigenvalue {min_eigenvalue:.3e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("trace {trace} deviates from 1 beyond tolerance")]
    NotUnitTrace { trace: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("rate out of admissible range: {0}")]
    InvalidRate(String),

    #[error("generator fails the symmetry requirements: {0}")]
    InvalidSymmetry(String),

    #[error("requested rate is infeasible: {0}")]
    InfeasibleRate(String),

    #[error("supports are disjoint: {0}")]
    DisjointSupport(String),

    #[error("numerical failure in {context}: {detail}")]
    NumericalFailure { context: String, detail: String },

    #[error("precondition not met: {0}")]
    ConditionNotMet(String),

    #[error("problem size exceeds capacity: {0}")]
    CapacityExceeded(String),
}

pub type Result<T> = std::result::Result<T, Error>;
