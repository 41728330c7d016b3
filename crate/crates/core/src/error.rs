use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Unknown table/column, duplicate names, reader bound to the wrong table.
    #[error("schema error: {0}")]
    Schema(String),

    /// Cross-tag comparison or arithmetic, non-boolean predicate, etc.
    #[error("type error: {0}")]
    Type(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("failed to load {path}: line {line}: {message}")]
    Load {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed query document or expression text.
    #[error("query parse error: {0}")]
    Parse(String),

    #[error("classification error: {0}")]
    Classification(String),

    #[error("planning error: {0}")]
    Planning(String),

    /// Runtime failure inside an operator, e.g. an unbound correlation parameter.
    #[error("execution error: {0}")]
    Execution(String),

    /// An internal contract between operators was broken.
    #[error("invariant violation: {0}")]
    Invariant(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    ///
    /// 2 covers malformed input (usage and query text), 3 data/schema problems,
    /// 4 planning problems and 5 broken internal invariants.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Parse(_) | Error::Config(_) => 2,
            Error::Schema(_) | Error::Type(_) | Error::Load { .. } | Error::Io { .. } => 3,
            Error::Classification(_) | Error::Planning(_) => 4,
            Error::Execution(_) | Error::Invariant(_) => 5,
        }
    }
}
