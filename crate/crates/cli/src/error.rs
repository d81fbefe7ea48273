use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] mssvdd::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: invalid JSON: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("configuration: {0}")]
    Config(String),

    #[error("{path}: {message}")]
    ModelFormat { path: PathBuf, message: String },

    #[error("{0}")]
    Input(String),
}

pub type Result<T> = std::result::Result<T, CliError>;

pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> CliError {
    CliError::Io {
        path: path.into(),
        source,
    }
}

pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> CliError {
    CliError::Json {
        path: path.into(),
        source,
    }
}
