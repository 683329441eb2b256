use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("empty opinion profile")]
    EmptyProfile,

    #[error("reference opinion is not an element of the profile")]
    ReferenceNotInProfile,

    #[error("node {node} out of range for a network with {n} nodes")]
    InvalidNode { node: usize, n: usize },

    #[error("({from}, {to}) is not an edge of the network")]
    NotAnEdge { from: usize, to: usize },

    #[error("row {row} sums to {sum}, expected exactly 1")]
    RowSum { row: usize, sum: String },

    #[error("negative weight at ({row}, {col})")]
    NegativeWeight { row: usize, col: usize },

    #[error("row {row}: common denominator too large for exact integer scaling")]
    DenominatorTooLarge { row: usize },

    #[error("node sets must be non-empty")]
    EmptySet,

    #[error("{what}: size {size} exceeds bound {bound}")]
    BoundExceeded {
        what: &'static str,
        size: u128,
        bound: u128,
    },

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("assignment does not satisfy the instance")]
    Unsatisfied,

    #[error("replay mismatch: {0}")]
    ReplayMismatch(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
