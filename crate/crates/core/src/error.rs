use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("malformed sparse matrix: {0}")]
    InvalidMatrix(String),

    #[error("power iteration did not converge in {iterations} iterations (last estimate {estimate})")]
    NoConvergence { estimate: f64, iterations: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("game has no bilinear zero-sum structure; use the generic extragradient subproblem solver instead")]
    StructureUnavailable,

    #[error("value oracles are required for {0}")]
    MissingValueOracle(&'static str),

    #[error("inner solver exhausted {iterations} iterations at outer step {outer} (gap {gap:e}, target {target:e})")]
    InnerFailure {
        outer: usize,
        iterations: usize,
        gap: f64,
        target: f64,
    },

    #[error("inexactness check failed after a certified inner solve: gap {gap:e} > {target:e}")]
    TheoryViolation { gap: f64, target: f64 },
}

pub(crate) fn check_dim(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            found,
        })
    }
}
