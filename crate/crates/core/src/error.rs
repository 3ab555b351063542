use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("arena parse error at line {line}: {msg}")]
    ArenaParse { line: usize, msg: String },

    #[error("raycast origin ({x}, {y}) is not in free space")]
    OriginInWall { x: f64, y: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("cluster set is empty")]
    EmptyClusterSet,

    #[error("k-means needs k <= number of points (k = {k}, points = {points})")]
    TooFewPoints { k: usize, points: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("cannot select {requested} records from a log of {available}")]
    SelectionTooLarge { requested: usize, available: usize },

    #[error("genotype parse error: {0}")]
    GenotypeParse(String),

    #[error("config error at line {line}: {msg}")]
    ConfigParse { line: usize, msg: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("malformed run output {path}: {msg}")]
    RunOutput { path: PathBuf, msg: String },

    #[error("{path}: {source}")]
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
