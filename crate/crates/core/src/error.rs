use thiserror::Error;

/// Errors produced by the game, solver and simulation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("node count {0} must be even and at least 2")]
    OddNodeCount(usize),

    #[error("node count {n} out of range (max {max})")]
    NodeCountOutOfRange { n: usize, max: usize },

    #[error("invalid matching: {0}")]
    InvalidMatching(String),

    #[error("matchings disagree on node count: {0} vs {1}")]
    MismatchedNodeCount(usize, usize),

    #[error("empty matching family")]
    EmptyFamily,

    #[error("family is not independent: {0}")]
    DependentFamily(String),

    #[error("parameter {name} out of range: {value}")]
    OutOfRange { name: &'static str, value: f64 },

    #[error("{name} = {value} outside supported range {min}..={max}")]
    Unsupported {
        name: &'static str,
        value: usize,
        min: usize,
        max: usize,
    },

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix has non-finite entries")]
    NonFinite,

    #[error("matrix is not positive semidefinite (eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("closed form requires {0}")]
    ClosedFormUnavailable(&'static str),

    #[error("answer space too large: {count} answers (limit {limit})")]
    AnswerSpaceOverflow { count: u128, limit: u128 },

    #[error("eigen-decomposition failed to converge")]
    EigenFailure,

    #[error("solver did not reach gap tolerance: best gap {best_gap:e} after {iterations} iterations")]
    NotConverged { best_gap: f64, iterations: usize },

    #[error("physical value {pv} exceeds selective value {sv}")]
    ValueOrdering { sv: f64, pv: f64 },

    #[error("Gram matrix is not a function of x xor y (deviation {0:e})")]
    NotShiftInvariant(f64),

    #[error("independence cross-check disagreed with cycle search")]
    CrossCheckFailed,
}

pub type Result<T> = std::result::Result<T, Error>;
