use thiserror::Error;

/// Errors produced by problem construction, solvers, and bundle I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// The monitored potential function increased beyond the allowed slack.
    /// Signals a step-size or Lipschitz-estimate bug, not a data problem.
    #[error(
        "potential descent violated at iteration {iteration}: \
         increase {increase:.3e} exceeds slack {slack:.1e}"
    )]
    DescentViolation {
        iteration: usize,
        increase: f64,
        slack: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
