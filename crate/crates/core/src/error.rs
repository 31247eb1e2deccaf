use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// A nodal value violates a mathematical precondition.
    #[error("domain error at node {node}: {message}")]
    Domain { node: usize, message: String },

    /// Invalid configuration or parameter.
    #[error("configuration error: {0}")]
    Config(String),

    /// Two objects that must share a grid do not.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// An iterative procedure failed to converge.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The operation does not support the given input.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Expression syntax or binding error.
    #[error("expression error at position {position}: {message}")]
    Expression { position: usize, message: String },

    /// Hypothesis checks failed and the caller did not force the operation.
    #[error("hypothesis checks failed: {}", .0.join(", "))]
    Hypotheses(Vec<String>),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn domain(node: usize, message: impl Into<String>) -> Self {
        Error::Domain {
            node,
            message: message.into(),
        }
    }
}
