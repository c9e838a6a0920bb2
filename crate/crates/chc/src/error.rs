use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] chc_core::Error),
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),
    #[error("missing required key `{0}`")]
    MissingKey(String),
    #[error("invalid value for `{key}`: {message}")]
    InvalidValue { key: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed {what}: {message}")]
    Format { what: &'static str, message: String },
    #[error("{study}: {message}")]
    Study {
        study: &'static str,
        message: String,
    },
}

impl Error {
    pub fn invalid(key: &str, message: impl Into<String>) -> Self {
        Error::InvalidValue {
            key: key.to_string(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
