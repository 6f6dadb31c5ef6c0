use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("load error: {0}")]
    Load(String),

    #[error("filter error: {0}")]
    Filter(String),

    #[error("transform error: {0}")]
    Transform(String),

    #[error("estimator error: {0}")]
    Estimator(String),

    #[error("lambda path error: {0}")]
    Path(String),

    #[error("solver error: {0}")]
    Solver(String),

    #[error("selection error: {0}")]
    Selection(String),

    #[error("binarization rule error: {0}")]
    Rule(String),

    #[error("consensus error: {0}")]
    Consensus(String),

    #[error("threshold error: {0}")]
    Threshold(String),

    #[error("export error: {0}")]
    Export(String),

    #[error("render error: {0}")]
    Render(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
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
}
