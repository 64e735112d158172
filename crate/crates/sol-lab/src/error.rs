use thiserror::Error;

/// Error type shared by every module in the crate.
#[derive(Debug, Error)]
pub enum SolError {
    #[error("quadratic fields differ: D = {lhs} vs D = {rhs}")]
    MismatchedField { lhs: u64, rhs: u64 },

    #[error("division by zero in Q(sqrt {d})")]
    DivisionByZero { d: u64 },

    #[error("invalid discriminant {d}: {reason}")]
    InvalidDiscriminant { d: u64, reason: String },

    #[error("matrix [[{a}, {b}], [{c}, {d}]] has determinant {det}, expected 1")]
    DetNotOne { a: i64, b: i64, c: i64, d: i64, det: i64 },

    #[error("unsupported matrix: {0}")]
    UnsupportedMatrix(String),

    #[error("degenerate lattice: {0}")]
    DegenerateLattice(String),

    #[error("representative degeneracy: {0}")]
    RepresentativeDegeneracy(String),

    #[error("no solution: {0}")]
    NoSolution(String),

    #[error("exactness lost: {0}")]
    InexactOperation(String),

    #[error("integer overflow in {0}")]
    Overflow(String),

    #[error("{0}")]
    Domain(String),

    #[error("internal invariant violated: {0}")]
    InvariantViolation(String),
}

pub type Result<T> = std::result::Result<T, SolError>;
