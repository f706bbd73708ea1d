use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("tree scan needs a length of lanes * 2^j, got {len} with {lanes} lanes")]
    TreeLength { len: usize, lanes: usize },

    #[error("unknown algorithm label `{0}`")]
    UnknownAlgorithm(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{algorithm} disagrees with the sequential scan at {detail}")]
    Verification { algorithm: String, detail: String },

    #[error("failed to write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
