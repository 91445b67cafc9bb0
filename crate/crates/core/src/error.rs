use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("config line {line}: key `{key}`: {message}")]
    ConfigKey {
        line: usize,
        key: String,
        message: String,
    },

    #[error("degenerate state: rho[{index}] = {value} is not positive")]
    Degenerate { index: usize, value: f64 },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("insufficient resolution: {0}")]
    InsufficientResolution(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed data: {message}")]
    Format { path: PathBuf, message: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
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
}
