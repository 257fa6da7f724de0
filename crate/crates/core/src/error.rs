use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
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

    /// Malformed input data, reported with its 1-based data row (header
    /// excluded) and column name when known.
    #[error("{}{message}", location(.row, .column))]
    Data {
        row: Option<usize>,
        column: Option<String>,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    /// A caller broke an operation's precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("result is stale: dataset hash {found} does not match {expected}")]
    StaleResult { expected: String, found: String },
}

fn location(row: &Option<usize>, column: &Option<String>) -> String {
    match (row, column) {
        (Some(r), Some(c)) => format!("row {r}, column '{c}': "),
        (Some(r), None) => format!("row {r}: "),
        (None, Some(c)) => format!("column '{c}': "),
        (None, None) => String::new(),
    }
}

impl Error {
    pub(crate) fn data(message: impl Into<String>) -> Self {
        Error::Data {
            row: None,
            column: None,
            message: message.into(),
        }
    }

    pub(crate) fn at(row: usize, column: &str, message: impl Into<String>) -> Self {
        Error::Data {
            row: Some(row),
            column: Some(column.to_string()),
            message: message.into(),
        }
    }

    pub(crate) fn contract(message: impl Into<String>) -> Self {
        Error::Contract(message.into())
    }

    pub(crate) fn config(message: impl Into<String>) -> Self {
        Error::Config(message.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code class: 2 config, 3 io, 4 data/contract.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Io { .. } | Error::Csv { .. } | Error::Json { .. } => 3,
            Error::Data { .. }
            | Error::Contract(_)
            | Error::DimensionMismatch { .. }
            | Error::StaleResult { .. } => 4,
        }
    }
}
