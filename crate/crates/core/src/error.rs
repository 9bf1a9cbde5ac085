//! Error type shared by every stage of the pipeline.
use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("call stack is empty")]
    EmptyStack,

    #[error("frame indices are not consecutive: expected #{expected}, found #{found}")]
    NonConsecutiveIndices { expected: usize, found: usize },

    #[error("invalid frame: {0}")]
    InvalidFrame(String),

    #[error("no stack frames found in backtrace")]
    NoFramesFound,

    #[error("malformed frame `{line}`: {reason}")]
    MalformedFrame { line: String, reason: String },

    #[error("schema error at `{field}`: {message}")]
    Schema { field: String, message: String },

    #[error("directory not found or unreadable: {}", .0.display())]
    DirNotFound(PathBuf),

    #[error("no valid reports in {}", .0.display())]
    NoValidReports(PathBuf),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid distance matrix: {0}")]
    InvalidMatrix(String),

    #[error("output directory {} is not empty (use --force)", .0.display())]
    OutputConflict(PathBuf),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn schema(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn malformed(line: &str, reason: impl Into<String>) -> Self {
        Error::MalformedFrame {
            line: line.to_string(),
            reason: reason.into(),
        }
    }
}
