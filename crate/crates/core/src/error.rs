use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("scheme {scheme} is not implemented in dimension {dim}")]
    UnsupportedScheme { scheme: String, dim: usize },
    #[error("integrand is not finite at node {index}")]
    NonFiniteValue { index: usize },
    #[error("gradient is ambiguous at this point ({ties} tied nodes)")]
    TieAtNode { ties: usize },
    #[error("field is not smooth: {0}")]
    NotSmooth(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is singular")]
    SingularMatrix,
    #[error("convex hull failed: {0}")]
    HullFailure(String),
    #[error("packing is empty (M = 0)")]
    EmptyPacking,
    #[error("no root in the bracketing interval")]
    NoRoot,
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
