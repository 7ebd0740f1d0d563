use thiserror::Error;

/// Errors produced by graph construction, data generation and the tests.
#[derive(Debug, Error)]
pub enum NirdError {
    #[error("node {0} has no neighbors")]
    IsolatedNode(usize),

    #[error("self-loop at node {0}")]
    SelfLoop(usize),

    #[error("node id {id} out of range for a graph with {n} nodes")]
    OutOfRange { id: usize, n: usize },

    #[error("invalid parameters: {0}")]
    BadParams(String),

    #[error("generator for case {expected} called with a case {got} config")]
    BadCase { expected: u8, got: u8 },

    #[error("degenerate input: all points are identical")]
    DegenerateInput,

    #[error("invalid bandwidth: {0}")]
    BadBandwidth(f64),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("exact method limited to {limit} nodes, got {n}; use the random-feature method")]
    PathTooLarge { n: usize, limit: usize },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, NirdError>;

impl NirdError {
    pub(crate) fn parse(line: usize, column: usize, message: impl Into<String>) -> Self {
        NirdError::Parse {
            line,
            column,
            message: message.into(),
        }
    }

    pub(crate) fn mismatch(message: impl Into<String>) -> Self {
        NirdError::DimensionMismatch(message.into())
    }
}
