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

    #[error("csv error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("json error in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("empty file: {0}")]
    EmptyFile(PathBuf),

    #[error("schema mismatch: missing column \"{0}\"")]
    MissingColumn(String),

    #[error("parse error at row {row}, column \"{column}\": cannot read {value:?} as a number")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },

    #[error("missing value at row {row}, column \"{column}\"")]
    MissingValue { row: usize, column: String },

    #[error("row {row} has {found} fields, header has {expected}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("non-binary value {value} in column \"{column}\" at row {row}")]
    NonBinary {
        column: String,
        row: usize,
        value: f64,
    },

    #[error("unknown task \"{0}\"")]
    UnknownTask(String),

    #[error("unknown column \"{0}\"")]
    UnknownColumn(String),

    #[error("group {0} has no rows")]
    UndefinedGroup(usize),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("bias calibration did not converge after {iterations} iterations (rate {rate:.4}, target {target:.4})")]
    NoConvergence {
        iterations: usize,
        rate: f64,
        target: f64,
    },

    #[error("criterion weights require a training task, none given")]
    TaskRequired,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("missing baseline for task \"{0}\"")]
    MissingBaseline(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }
}
