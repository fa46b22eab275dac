use std::path::PathBuf;

/// Errors produced by the optimizer and its tooling.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("population too small: need at least {needed} members, got {got}")]
    PopulationTooSmall { needed: usize, got: usize },

    #[error("empty population")]
    EmptyPopulation,

    #[error("surrogate training failed: {0}")]
    Training(String),

    #[error("template error: {0}")]
    Template(String),

    #[error("failed to read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },

    #[error("malformed file {path}: {message}")]
    Malformed { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
