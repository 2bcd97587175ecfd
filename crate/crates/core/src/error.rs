use std::path::PathBuf;

use thiserror::Error;

use crate::adaptive::SolveReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: expected {expected}, got {got}")]
    DimensionMismatch {
        op: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid sparse matrix: {0}")]
    InvalidMatrix(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("negative edge weight {weight} at ({row}, {col})")]
    NegativeWeight { row: usize, col: usize, weight: f64 },

    #[error("positive off-diagonal entry {value} at ({row}, {col}); not a graph Laplacian")]
    PositiveOffDiagonal { row: usize, col: usize, value: f64 },

    #[error("zero diagonal in row {0} with nonzero off-diagonal entries")]
    ZeroDiagonal(usize),

    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("graph is empty after preprocessing")]
    EmptyGraph,

    #[error("invalid path cover: {0}")]
    InvalidCover(String),

    #[error("coarsening stagnated at level {level} ({n} vertices, no reduction)")]
    Stagnation { level: usize, n: usize },

    #[error("coarsest operator is singular after grounding (disconnected coarse graph?)")]
    SingularCoarse,

    #[error("composite preconditioner needs at least one hierarchy")]
    EmptyHierarchyList,

    #[error("smooth error estimate vanished after projection")]
    DegenerateError,

    #[error("right-hand side is not orthogonal to the constant vector (sum = {sum:e})")]
    InconsistentRhs { sum: f64 },

    #[error("iteration diverged after {} iterations", .0.iterations)]
    Diverged(Box<SolveReport>),

    #[error("invalid benchmark spec: {0}")]
    InvalidSpec(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
