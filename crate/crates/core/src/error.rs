use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty edge list: a graph needs at least one edge")]
    EmptyEdgeList,

    #[error("node {node} out of range for a graph with {node_count} nodes")]
    NodeOutOfRange { node: usize, node_count: usize },

    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("feature dimension mismatch: expected {expected}, got {got} (features must live in one shared, structure-respecting space)")]
    FeatureDim { expected: usize, got: usize },

    #[error("hop count mismatch between ego-graphs: {0} vs {1}")]
    HopMismatch(usize, usize),

    #[error("matrix contains non-finite values")]
    NonFinite,

    #[error("missing label for node {0}")]
    MissingLabel(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{0}")]
    Evaluation(String),

    #[error("dataset not found at {path}: {hint}")]
    MissingDataset { path: PathBuf, hint: String },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("I/O error on {path}: {source}")]
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
