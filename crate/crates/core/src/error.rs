//! Error type shared across the crate.

use std::path::PathBuf;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot open {path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("no observations: data section after the header is empty")]
    NoObservations,

    #[error("duplicate column name {name:?}")]
    DuplicateColumn { name: String },

    #[error("empty column name in header (column {column})")]
    EmptyColumnName { column: usize },

    #[error("non-binary cell {value:?} at row {row}, column {column:?} (cells must be 0 or 1)")]
    NonBinaryCell {
        row: usize,
        column: String,
        value: String,
    },

    #[error("row {row} has {found} cells, expected {expected}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("node {node} is contained in its own parent set")]
    NodeInParentSet { node: usize },

    #[error("index {index} out of range for {d} variables")]
    IndexOutOfRange { index: usize, d: usize },

    #[error("self-loop at node {node}")]
    SelfLoop { node: usize },

    #[error("adjacency matrix contains a directed cycle")]
    CyclicGraph,

    #[error("{d} nodes exceeds the supported maximum of {max}")]
    TooManyNodes { d: usize, max: usize },

    #[error("exhaustive enumeration refused for d = {d} (supported for d <= {max}); use the MCMC sampler instead")]
    EnumerationTooLarge { d: usize, max: usize },

    #[error("dimension mismatch: expected d = {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("score cache was built for a different dataset or hyperparameters")]
    StaleCache,

    #[error("malformed DAG encoding: {reason}")]
    InvalidEncoding { reason: String },

    #[error("series of length {len} is too short (need at least {min})")]
    SeriesTooShort { len: usize, min: usize },

    #[error("statistic undefined: {reason}")]
    UndefinedStatistic { reason: String },

    #[error("block conditional has {candidates} candidate configurations, above the ceiling of {ceiling}; lower the block size or the parent cap")]
    BlockTooLarge { candidates: usize, ceiling: usize },

    #[error("release mode {mode} requires retained synthetic datasets ({needed} needed, {available} retained)")]
    DatasetsNotRetained {
        mode: u8,
        needed: usize,
        available: usize,
    },

    #[error("unknown scenario {id:?}; valid ids: {valid}")]
    UnknownScenario { id: String, valid: String },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
