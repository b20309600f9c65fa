use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("vector must have at least one dimension")]
    EmptyVector,

    #[error("non-finite value {value} at index {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("probability {value} at index {index} outside [0, 1]")]
    InvalidProbability { index: usize, value: f64 },

    #[error("entailing from impossible feature at index {index} (Q(y=1) = 0)")]
    ImpossibleFeature { index: usize },

    #[error("entailed feature certainly known at index {index} (Q(x=1) = 1)")]
    CertainlyKnown { index: usize },

    #[error("unknown-mass shift must be positive, got {0}")]
    InvalidShift(f64),

    #[error("dimension index {index} out of range for dim {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("distribution dimension {dim} exceeds the enumeration cap of {max}")]
    DimensionTooLarge { dim: usize, max: usize },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("malformed header at byte offset {offset}")]
    MalformedHeader { offset: u64 },

    #[error("truncated file at byte offset {offset}")]
    Truncated { offset: u64 },

    #[error("count mismatch: header declares {expected} entries, found {found} (byte offset {offset})")]
    CountMismatch { expected: usize, found: usize, offset: u64 },

    #[error("duplicate token {token:?} at byte offset {offset}")]
    DuplicateToken { token: String, offset: u64 },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("zero vector has no direction")]
    ZeroVector,

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("numerical failure updating node {node:?} dimension {dim} in sweep {sweep}")]
    Solver { node: String, dim: usize, sweep: usize },

    #[error("every pair contains an out-of-vocabulary word")]
    AllPairsOov,

    #[error("training set of fold {fold} is empty after lexical filtering")]
    EmptyTrainingFold { fold: usize },

    #[error("unknown method {0:?}")]
    UnknownMethod(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
