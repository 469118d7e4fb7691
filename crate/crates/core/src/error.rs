use std::path::PathBuf;

use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("index out of range: {0}")]
    Index(String),

    #[error("range error: {0}")]
    Range(String),

    #[error("unknown {kind} label `{name}`")]
    Vocabulary { kind: &'static str, name: String },

    #[error("lookup failed: {0}")]
    Lookup(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("corrupt file: {reason} at byte offset {offset}")]
    Corrupt { reason: String, offset: u64 },

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("duplicate id `{0}`")]
    DuplicateId(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    RawIo(#[from] std::io::Error),
}

impl Error {
    /// Stable short name used in machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Shape { .. } => "shape",
            Error::EmptyInput(_) => "empty_input",
            Error::Index(_) => "index",
            Error::Range(_) => "range",
            Error::Vocabulary { .. } => "vocabulary",
            Error::Lookup(_) => "lookup",
            Error::Config(_) => "config",
            Error::Format(_) => "format",
            Error::Corrupt { .. } => "corrupt",
            Error::Parse { .. } => "parse",
            Error::DuplicateId(_) => "duplicate_id",
            Error::Io { .. } | Error::RawIo(_) => "io",
        }
    }

    pub(crate) fn shape(op: &'static str, left: &[usize], right: &[usize]) -> Self {
        Error::Shape {
            op,
            left: left.to_vec(),
            right: right.to_vec(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
