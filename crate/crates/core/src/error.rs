use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the domain of the function it was passed to.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration that cannot be run as given.
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("covariance factorization failed for N = {steps}: {reason}; try a smaller N or the circulant method")]
    Factorization { steps: usize, reason: String },

    #[error("non-finite value in trajectory {subject} at node {node}")]
    NonFinite { subject: usize, node: usize },

    #[error("random effect is not identifiable: information {info} <= 0")]
    Unidentifiable { info: f64 },

    #[error("degenerate grid: {0}")]
    DegenerateGrid(String),

    #[error("{failed} of {total} replicates failed (limit 5%); first failure: {first}")]
    TooManyFailures {
        failed: usize,
        total: usize,
        first: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Format {
            path: path.into(),
            message: message.to_string(),
        }
    }

    /// True for failures that come from the numerics rather than from the
    /// caller's configuration or the file system.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Quadrature(_)
                | Error::Factorization { .. }
                | Error::NonFinite { .. }
                | Error::Unidentifiable { .. }
                | Error::DegenerateGrid(_)
                | Error::TooManyFailures { .. }
        )
    }
}
