use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on `{}`: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV input is empty")]
    EmptyInput,

    #[error("duplicate column name `{0}`")]
    DuplicateColumn(String),

    #[error("row {row}: expected {expected} fields, found {found}")]
    Arity { row: usize, expected: usize, found: usize },

    #[error("row {row}, column `{column}`: cannot parse `{value}` as {kind}")]
    Parse {
        row: usize,
        column: String,
        value: String,
        kind: &'static str,
    },

    #[error("header mismatch in `{relation}`: {message}")]
    Header { relation: String, message: String },

    #[error("unknown relation `{0}`")]
    UnknownRelation(String),

    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),

    #[error("foreign key {from} references missing `{target}`")]
    DanglingForeignKey { from: String, target: String },

    #[error("type mismatch: {0}")]
    TypeMismatch(String),

    #[error("syntax error at position {position}: {message}")]
    Syntax { position: usize, message: String },

    #[error("unsupported construct: {0}")]
    Unsupported(String),

    #[error("query cannot be answered: {0}")]
    Unanswerable(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("network for bubble `{0}` is degenerate")]
    DegenerateNetwork(String),

    #[error("model directory: {0}")]
    Format(String),

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the environment (files, config, model
    /// directory) rather than by the query or its inputs.
    pub fn is_environmental(&self) -> bool {
        matches!(self, Error::Io { .. } | Error::Config(_) | Error::Format(_))
    }
}
