use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual} ({context})")]
    DimensionMismatch {
        expected: usize,
        actual: usize,
        context: &'static str,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(
        "point sets collide: point {left_index} of the first set and point {right_index} of the \
         second are {distance:e} apart"
    )]
    Collision {
        left_index: usize,
        right_index: usize,
        distance: f64,
    },

    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Divergence { epoch: usize, loss: f64 },

    #[error(
        "k-nearest-neighbour graph with k = {k} is disconnected (component sizes {component_sizes:?}); \
         try a larger k"
    )]
    DisconnectedGraph {
        k: usize,
        component_sizes: Vec<usize>,
    },

    #[error("activation trace does not match network: {0}")]
    TraceMismatch(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
