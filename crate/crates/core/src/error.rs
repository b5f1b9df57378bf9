use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid agent count {n} for {kind} graph: {reason}")]
    InvalidGraphSize {
        kind: &'static str,
        n: usize,
        reason: &'static str,
    },

    #[error("graph is disconnected")]
    Disconnected,

    #[error("invalid edge ({0}, {1})")]
    InvalidEdge(usize, usize),

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("mixing matrix rejected: {0}")]
    InvalidMixing(String),

    #[error("no strictly positive eigenvalue above the kernel threshold")]
    NoPositiveEigenvalue,

    #[error("polynomial gossip maps eigenvalue {lambda} to {value} < 0")]
    NegativeEffectiveEigenvalue { lambda: f64, value: f64 },

    #[error("non-finite data: {0}")]
    NonFinite(String),

    #[error("{solver} did not converge within {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("iterates diverged after {0} iterations")]
    Diverged(usize),

    #[error("option I stopping requires an exact reference solution")]
    MissingReference,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn shape(expected: impl Into<String>, got: impl Into<String>) -> Self {
        Error::ShapeMismatch {
            expected: expected.into(),
            got: got.into(),
        }
    }
}
