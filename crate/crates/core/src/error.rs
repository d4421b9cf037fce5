use alloc::string::String;

/// Errors raised by the tree engine.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("node index set is empty")]
    EmptyNode,
    #[error("no valid split: every candidate leaves one side empty")]
    NoValidSplit,
    #[error("degenerate split: one side of the threshold is empty")]
    DegenerateSplit,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite value at row {row}, column {column}")]
    NonFinite { row: usize, column: usize },
    #[error("direction must have at least one finite nonzero coefficient")]
    ZeroDirection,
    #[error("index {index} out of range for {n} observations")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("index set must be strictly increasing")]
    UnsortedIndexSet,
    #[error("node has {size} points; exhaustive oracle is capped at {cap} points and sparsity 3")]
    OracleCapExceeded { size: usize, cap: usize },
    #[error("node {0} is not an internal node")]
    NotInternal(usize),
    #[error("unknown node id {0}")]
    UnknownNode(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
