use thiserror::Error;

/// Failure modes shared by every module of the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("series did not converge within {terms} terms (last relative term {last_rel:e})")]
    NonConvergence { terms: usize, last_rel: f64 },

    #[error("branch violation: {0}")]
    Branch(String),

    #[error("quadrature resolution guard: {0}")]
    Resolution(String),

    #[error("finite-difference step {0:e} outside (1e-6, 1e-1)")]
    InvalidStep(f64),

    #[error("matrix is not special unitary (deviation {0:e})")]
    NotUnitary(f64),

    #[error("point is outside region W (C*Re(x.z)/|z| = {0})")]
    RegionViolation(f64),

    #[error("quadrature failure: {0}")]
    Quadrature(String),

    #[error("overflow or underflow: {0}")]
    Overflow(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("momentum tail bound {bound:e} exceeds tolerance {tol:e}")]
    TailBound { bound: f64, tol: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
