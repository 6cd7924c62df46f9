use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("row {row}, column {column}: cannot parse {value:?} as a number")]
    Parse { row: usize, column: usize, value: String },

    #[error("row {row}, column {column}: non-finite value {value} (missing values are not supported)")]
    NonFinite { row: usize, column: usize, value: f64 },

    #[error("row {row}: expected {expected} columns, found {found}")]
    RaggedRow { row: usize, expected: usize, found: usize },

    #[error("dataset is empty")]
    EmptyData,

    #[error("label column {column} out of range for {n_columns} columns")]
    LabelColumn { column: usize, n_columns: usize },

    #[error("feature count mismatch: expected {expected}, found {found}")]
    FeatureMismatch { expected: usize, found: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("row {row}: label {value} is not 0 or 1")]
    InvalidLabel { row: usize, value: f64 },

    #[error("AUC needs at least one positive and one negative label")]
    SingleClass,

    #[error("non-finite entry in normal system")]
    NonFiniteSystem,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown configuration key {key:?} on line {line}")]
    UnknownKey { key: String, line: usize },

    #[error("probability output requires a binary (logistic) model")]
    ProbabilityForRegression,

    #[error("unsupported model format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("malformed model file: {0}")]
    Malformed(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
