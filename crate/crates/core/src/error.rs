use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed dataset, split file, feature table or prediction file.
    #[error("schema error at line {line}: {message}")]
    Schema { line: usize, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("vocabulary error: {0}")]
    Vocabulary(String),

    #[error("dimension mismatch in {op}: {detail}")]
    Dimension { op: &'static str, detail: String },

    #[error("training error: {0}")]
    Training(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("missing feature-table entries: {}", .0.join(" "))]
    MissingFeatures(Vec<String>),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn schema(line: usize, message: impl Into<String>) -> Self {
        Error::Schema {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn dim(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Dimension {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the CLI: 2 for configuration problems,
    /// 3 for anything wrong with the data or model files.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            _ => 3,
        }
    }
}
