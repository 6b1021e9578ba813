use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid hyperparameters, CLI flags, or split sizes.
    #[error("configuration error: {0}")]
    Config(String),

    /// Vector or matrix dimensions disagree.
    #[error("shape error: {0}")]
    Shape(String),

    /// Input data is missing, too short, or violates a record invariant.
    #[error("data error: {0}")]
    Data(String),

    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A regression or correlation with no unique answer (constant input).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("parse error in {source_name} at line {line}, field `{field}`: {message}")]
    Parse {
        source_name: String,
        line: u64,
        field: String,
        message: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable category name.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Shape(_) => "shape",
            Error::Data(_) => "data",
            Error::Domain(_) => "domain",
            Error::Degenerate(_) => "degenerate",
            Error::Parse { .. } => "parse",
            Error::Io { .. } => "io",
        }
    }

    /// Process exit code: 2 configuration, 3 data, 4 internal invariant violation.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Data(_)
            | Error::Domain(_)
            | Error::Degenerate(_)
            | Error::Parse { .. }
            | Error::Io { .. } => 3,
            Error::Shape(_) => 4,
        }
    }
}
