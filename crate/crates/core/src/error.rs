use alloc::string::String;

use crate::sampling::Strategy;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dataset has no edges")]
    EmptyDataset,
    #[error("node universe must contain at least 2 nodes, got {0}")]
    UniverseTooSmall(usize),
    #[error("node {node} outside universe of size {universe}")]
    NodeOutOfRange { node: u32, universe: usize },
    #[error("edges not sorted by timestamp at position {position}")]
    UnsortedEdges { position: usize },
    #[error("edge range {start}..{end} outside dataset of {len} edges")]
    RangeOutOfBounds { start: usize, end: usize, len: usize },
    #[error("split fractions must be positive and sum to 1, got ({0}, {1}, {2})")]
    InvalidFractions(f64, f64, f64),
    #[error("dataset of {edges} edges cannot be split into three non-empty timestamp-atomic ranges")]
    SplitTooSmall { edges: usize },
    #[error("test split is empty")]
    EmptyTestSplit,
    #[error("sample size {requested} exceeds candidate pool of size {pool}")]
    PoolTooSmall { requested: usize, pool: usize },
    #[error("{strategy} pool holds {available} candidates but {requested} were requested and padding is disabled")]
    Shortfall {
        strategy: Strategy,
        requested: usize,
        available: usize,
    },
    #[error("sample size must be at least 1")]
    ZeroSampleSize,
    #[error("update at t={t} precedes scorer clock {clock}")]
    TimeRegression { clock: u64, t: u64 },
    #[error("{0} is empty")]
    EmptyInput(&'static str),
    #[error("classification input needs at least one positive and one negative")]
    SingleClass,
    #[error("average precision needs at least one positive")]
    NoPositives,
    #[error("no source group has both a positive and a negative")]
    NoIncludableGroups,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid rank histogram: {0}")]
    InvalidHistogram(String),
    #[error("histograms disagree on universe size ({0} vs {1})")]
    UniverseMismatch(u64, u64),
    #[error("vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 observations, got {0}")]
    TooFewObservations(usize),
    #[error("zero variance in {0}")]
    ZeroVariance(String),
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("surprise target {target} unreachable; achievable range is [{low:.4}, {high:.4}]")]
    UnreachableTarget { target: f64, low: f64, high: f64 },
}
