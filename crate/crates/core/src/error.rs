//! Error taxonomy for the numerical pipeline.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate branch data: {0}")]
    DegenerateBranch(String),

    #[error("quadrature did not converge: estimated error {estimate:.3e} exceeds {tol:.3e}")]
    QuadratureNoConverge { estimate: f64, tol: f64 },

    #[error("Im tau is not positive definite (min eigenvalue {0:.6e})")]
    TauNotPositive(f64),

    #[error("point lies on a cut; evaluate a one-sided limit instead")]
    OnCut,

    #[error("singular point: {0}")]
    Singular(String),

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("outside the validity domain: {0}")]
    Domain(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("out of asymptotic regime: {0}")]
    OutOfRegime(String),
}

pub type Result<T> = std::result::Result<T, Error>;
