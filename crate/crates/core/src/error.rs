use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("input file not found: {}", .0.display())]
    MissingInput(PathBuf),

    #[error("{}:{line}: {msg}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("invalid knowledge graph: {0}")]
    InvalidKg(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("plugin error: {0}")]
    Plugin(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("run stopped after iteration {0}; resume from the checkpoint")]
    Interrupted(usize),

    #[error("io error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad input data rather than runtime failures.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::MissingInput(_)
                | Error::Parse { .. }
                | Error::InvalidKg(_)
                | Error::InvalidInput(_)
                | Error::Config(_)
                | Error::Checkpoint(_)
                | Error::Json(_)
                | Error::Csv(_)
        )
    }
}
