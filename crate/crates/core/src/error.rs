use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("duplicate entry at ({0}, {1})")]
    DuplicateEntry(usize, usize),
    #[error("index ({row}, {col}) out of range for a {rows}x{cols} matrix")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },
    #[error("row {0} has no observed entries")]
    EmptyRow(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("instance too large for the exact solver: {0}")]
    TooLarge(String),
    #[error("row {0} belongs to more than one tile")]
    OverlappingTiles(usize),
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("invalid model spec: {0}")]
    SpecInvalid(String),
    #[error("test set is empty")]
    EmptyTestSet,
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("value {value} at line {line} is not a bit")]
    ValueOutOfDomain { line: usize, value: String },
    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
