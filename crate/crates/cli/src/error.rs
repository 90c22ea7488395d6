use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Syntax(String),
    #[error("config: missing mandatory key `{0}`")]
    MissingKey(String),
    #[error("config: unknown key `{0}`")]
    UnknownKey(String),
    #[error("config: unknown section `[{0}]`")]
    UnknownSection(String),
    #[error("config: `{key}`: {msg}")]
    InvalidValue { key: String, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("output directory {0} is not empty; pass --force to overwrite")]
    OutputExists(PathBuf),
    #[error("refusing to clear {0}: it does not look like a polyfk output directory")]
    ForeignDirectory(PathBuf),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] polyfk_core::Error),
}

pub type Result<T> = std::result::Result<T, CliError>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
    let path = path.into();
    move |source| CliError::Io { path, source }
}
