use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    SizeMismatch { expected: usize, found: usize },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("non-finite value in {term}")]
    NonFinite { term: &'static str },

    #[error("subsolver did not converge within {cycles} cycles")]
    NoConvergence { cycles: usize },

    #[error("nonconvex subproblem detected at coordinate {index}")]
    NonconvexSubproblem { index: usize },

    #[error("iteration cap of {cap} exceeded")]
    IterationCap { cap: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("internal error: {0}")]
    Internal(String),
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::SizeMismatch { expected, found })
    }
}
