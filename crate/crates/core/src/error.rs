use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    #[error("local constraint index {local} out of range for {node} (node has {count})")]
    ConstraintIndex {
        node: String,
        local: usize,
        count: usize,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("trace {path}: line {line}: {msg}")]
    TraceParse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("trace exhausted: slot {slot} requested but trace has {len} slots")]
    TraceExhausted { slot: usize, len: usize },

    #[error("sigma {sigma} does not exceed the floor 3KG^2 = {floor}")]
    InvalidSigma { sigma: f64, floor: f64 },

    #[error("benchmark infeasible within budget: max violation {violation:e} after {iterations} iterations")]
    Infeasible { violation: f64, iterations: usize },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
