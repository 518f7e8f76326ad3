use thiserror::Error;

use crate::graph::ValidationReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Inconsistent sizes, missing self-loops, malformed block maps.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {actual} ({context})")]
    Dimension {
        expected: usize,
        actual: usize,
        context: &'static str,
    },

    /// Arguments outside the domain of a mathematical operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("validation failed:\n{0}")]
    Validation(ValidationReport),

    #[error("solver did not converge after {iterations} iterations (projected gradient norm {residual:.3e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        best: Vec<f64>,
    },

    /// A runtime invariant that the algorithm guarantees was broken.
    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dim(expected: usize, actual: usize, context: &'static str) -> Self {
        Error::Dimension {
            expected,
            actual,
            context,
        }
    }
}

/// `read_to_string` with the path in the error message.
pub(crate) fn read_file(path: &std::path::Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}
