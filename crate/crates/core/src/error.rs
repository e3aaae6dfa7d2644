use thiserror::Error;

/// Errors produced by the solvers, generators and file formats.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("node index {index} out of range for a graph with {n} nodes")]
    NodeOutOfRange { index: usize, n: usize },

    #[error("graph is not connected")]
    Disconnected,

    #[error("node {0} has no neighbors")]
    IsolatedNode(usize),

    #[error("no connected sample found after {attempts} attempts (n = {n}, edge_prob = {edge_prob})")]
    GraphSampling { n: usize, edge_prob: f64, attempts: usize },

    #[error("reference objective is zero, relative accuracy is undefined")]
    ZeroReference,

    #[error("reference objective value is required")]
    MissingReference,

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
