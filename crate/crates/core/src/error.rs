use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),

    #[error("row {row}, column {column}: cannot parse {value:?} as a number")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },

    #[error("row {row}, column {column}: non-finite value {value:?}")]
    NonFinite {
        row: usize,
        column: String,
        value: String,
    },

    #[error("row {row} has {found} fields, expected {expected}")]
    Ragged {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("m >= 2 required, found {found} record(s)")]
    TooFewRecords { found: usize },

    #[error("duplicate column name {0:?}")]
    DuplicateColumn(String),

    #[error("column {0} has an empty name")]
    EmptyColumnName(usize),

    #[error("column {name:?} has length {found}, expected {expected}")]
    LengthMismatch {
        name: String,
        expected: usize,
        found: usize,
    },

    #[error("dataset has no columns")]
    NoColumns,

    #[error("unknown column {0}")]
    UnknownColumn(String),

    #[error("empty input")]
    EmptyInput,

    #[error("cell count at position {0} is zero")]
    ZeroCount(usize),

    #[error("record index {index} out of range for {len} records")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("population mismatch: expected {expected} records, found {found}")]
    PopulationMismatch { expected: usize, found: usize },

    #[error("need >= 2 columns, got {0}")]
    TooFewDims(usize),

    #[error("exact score enumerates d! permutations; d = {d} exceeds the cap of {cap}")]
    ExactCapExceeded { d: usize, cap: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl Error {
    /// True for failures caused by the input data rather than by arguments.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::Csv(_)
                | Error::Parse { .. }
                | Error::NonFinite { .. }
                | Error::Ragged { .. }
                | Error::TooFewRecords { .. }
                | Error::DuplicateColumn(_)
                | Error::EmptyColumnName(_)
                | Error::LengthMismatch { .. }
                | Error::NoColumns
        )
    }
}
