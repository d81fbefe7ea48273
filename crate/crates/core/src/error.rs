use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: non-numeric cell {cell:?}")]
    NonNumeric {
        path: PathBuf,
        line: usize,
        cell: String,
    },

    #[error("{path}:{line}: non-finite value {cell:?}")]
    NonFinite {
        path: PathBuf,
        line: usize,
        cell: String,
    },

    #[error("{path}:{line}: expected {expected} columns, found {found}")]
    RaggedRow {
        path: PathBuf,
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("{path}:{line}: unknown label {value:?} (expected 1 or 0)")]
    UnknownLabel {
        path: PathBuf,
        line: usize,
        value: String,
    },

    #[error("{path}: file contains no data rows")]
    EmptyFile { path: PathBuf },

    #[error("row count mismatch: {path} has {found} rows, expected {expected}")]
    RowCountMismatch {
        path: PathBuf,
        expected: usize,
        found: usize,
    },

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("class {class} has {count} members, fewer than the {k} folds requested")]
    ClassTooSmall { class: u8, count: usize, k: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("infeasible penalty: C * M = {product} < 1 (C = {c}, M = {m})")]
    InfeasiblePenalty { c: f64, m: usize, product: f64 },

    #[error("infeasible nu: nu * M = {product} < 1 (nu = {nu}, M = {m})")]
    InfeasibleNu { nu: f64, m: usize, product: f64 },

    #[error("degenerate kernel: no positive eigenvalues in the centered kernel")]
    DegenerateKernel,

    #[error("rank-deficient projection: pivot {pivot:e} below 1e-12")]
    RankDeficient { pivot: f64 },

    #[error("non-finite value encountered: {0}")]
    NonFiniteValue(String),

    #[error("all {cells} grid cells failed; first failure: {first}")]
    AllCellsFailed { cells: usize, first: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
