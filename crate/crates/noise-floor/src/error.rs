use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] noise_floor_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {kind}")]
    Csv { path: PathBuf, kind: CsvError },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("serialization failed: {0}")]
    Serialize(String),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CsvError {
    #[error("file contains no data rows")]
    Empty,
    #[error("row {row} has {found} fields, expected {expected}")]
    Ragged { row: usize, expected: usize, found: usize },
    #[error("row {row}, column {column}: '{value}' is not a number")]
    NonNumeric { row: usize, column: usize, value: String },
    #[error("malformed CSV: {0}")]
    Parse(String),
    #[error("expected a single column or row, got {rows}x{cols}")]
    NotAVector { rows: usize, cols: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
