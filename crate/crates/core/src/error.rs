use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised across the crate.
///
/// Mode indices in messages are 1-based.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch at mode {mode}: expected {expected}, found {found}")]
    Dimension {
        mode: usize,
        expected: usize,
        found: usize,
    },

    #[error("invalid mode {mode} for a tensor of order {order}")]
    InvalidMode { mode: usize, order: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("materialized tensor would hold {entries} entries, cap is {cap}")]
    Oversize { entries: u128, cap: usize },

    #[error("feature arity {found} does not match tensor arity {expected}")]
    Arity { expected: usize, found: usize },

    #[error("no tensor configured for arity {0}")]
    MissingTensor(usize),

    #[error("non-finite score for {what} {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("empty candidate list")]
    EmptyCandidates,

    #[error("gold {what} {index} outside of {size} choices")]
    GoldMissing {
        what: &'static str,
        index: usize,
        size: usize,
    },

    #[error("instance has no gold annotation")]
    Unlabeled,

    #[error("label `{0}` was not seen in training")]
    UnknownLabel(String),

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("template `{name}`: {msg}")]
    Template { name: String, msg: String },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("model format version `{found}` is not supported (expected `{expected}`)")]
    Version { found: String, expected: String },

    #[error("malformed model file: {0}")]
    ModelFormat(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Coarse classification used by the command line for exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Numeric,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::NonFinite { .. } => ErrorClass::Numeric,
            Error::Config(_) => ErrorClass::Usage,
            _ => ErrorClass::Data,
        }
    }

    pub(crate) fn parse(path: impl Into<String>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
