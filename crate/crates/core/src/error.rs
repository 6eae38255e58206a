//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by loading, validation, and the alignment pipeline.
#[derive(Debug, Error)]
pub enum AlignError {
    #[error("{file}:{line}: malformed line: {reason}")]
    MalformedLine {
        file: String,
        line: usize,
        reason: String,
    },

    #[error("{file}:{line}: triple references unknown entity id {id}")]
    UnknownEntity {
        file: String,
        line: usize,
        id: u64,
    },

    #[error("{file}:{line}: duplicate name line for entity id {id}")]
    DuplicateName {
        file: String,
        line: usize,
        id: u64,
    },

    #[error("duplicate {side} id {id} in alignment pairs")]
    DuplicateAlignment { side: &'static str, id: u32 },

    #[error("embedding dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },

    #[error("matrix shape mismatch: {left_rows}x{left_cols} vs {right_rows}x{right_cols}")]
    ShapeMismatch {
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },

    #[error("embedding matrix has {rows} rows, expected {expected}")]
    RowCountMismatch { rows: usize, expected: usize },

    #[error("no pseudo-labeled data: seed alignment set is empty")]
    EmptySeeds,

    #[error("side information produced no seeds (theta0 too small or names carry no signal)")]
    NoBootstrapSeeds,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("entity id {id} is outside the evaluation split ({role})")]
    OutsideSplit { id: u32, role: &'static str },

    #[error("invalid checkpoint: {0}")]
    BadCheckpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, AlignError>;
