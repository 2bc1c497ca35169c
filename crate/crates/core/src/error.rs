use thiserror::Error;

/// Errors raised by the geometry, projection, resolvent and solver layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A point lies outside the interior of the domain of the Legendre function.
    #[error("domain error: {0}")]
    Domain(String),
    /// Malformed arguments: dimension mismatch, bad weights, empty families.
    #[error("argument error: {0}")]
    Argument(String),
    /// The constraint set does not meet the domain of the Legendre function.
    #[error("infeasible: {0}")]
    Infeasible(String),
    /// An inner iterative solver hit its iteration cap.
    #[error("{solver} did not converge after {iterations} iterations (residual {residual:e})")]
    Convergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },
    /// A failure inside the main recursion, tagged with the outer iteration index.
    #[error("iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },
    /// Experiment specification failed validation.
    #[error("validation error: {0}")]
    Validation(String),
    #[error("i/o error at {path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn at(self, iteration: usize) -> Self {
        Error::AtIteration {
            iteration,
            source: Box::new(self),
        }
    }

    /// Innermost error, looking through iteration tags.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtIteration { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
