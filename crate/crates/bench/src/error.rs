use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed instance file: {0}")]
    Format(String),

    #[error("invalid JSON in {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("invalid arguments: {0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] nzs_core::Error),

    #[error("{method} did not converge after {iterations} iterations")]
    NotConverged { method: String, iterations: usize },
}

impl BenchError {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        BenchError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Process exit code: 1 for solver non-convergence, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::NotConverged { .. } => 1,
            BenchError::Core(e) if is_solver_failure(e) => 1,
            _ => 2,
        }
    }
}

fn is_solver_failure(e: &nzs_core::Error) -> bool {
    matches!(
        e,
        nzs_core::Error::InnerFailure { .. }
            | nzs_core::Error::TheoryViolation { .. }
            | nzs_core::Error::NoConvergence { .. }
    )
}

pub type Result<T> = std::result::Result<T, BenchError>;
