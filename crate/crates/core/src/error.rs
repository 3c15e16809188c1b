use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("trajectory association failed: {0}")]
    Association(String),

    #[error("alignment failed: {0}")]
    Alignment(String),

    #[error("too few correspondences: {found} (need {required})")]
    TooFewCorrespondences { found: usize, required: usize },

    #[error("syntax error at line {line}: {message}")]
    Syntax { line: usize, message: String },

    #[error("unknown configuration keys: {}", .0.join(", "))]
    UnknownKeys(Vec<String>),

    #[error("invariant violated for {key}: {message}")]
    Invariant { key: String, message: String },

    #[error("missing file: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("dataset contains no usable frames: {0}")]
    EmptyDataset(String),

    #[error("malformed file {}: {message}", .path.display())]
    Format { path: PathBuf, message: String },

    #[error("image error for {}: {message}", .path.display())]
    Image { path: PathBuf, message: String },

    #[error("i/o error for {}: {source}", .path.display())]
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

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by bad user input (config, arguments) rather
    /// than a failure while running.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidArgument(_)
                | Error::InvalidConfiguration(_)
                | Error::OutOfRange(_)
                | Error::Syntax { .. }
                | Error::UnknownKeys(_)
                | Error::Invariant { .. }
        )
    }
}
