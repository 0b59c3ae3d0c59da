use thiserror::Error;

pub type Result<T> = std::result::Result<T, LtnError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LtnError {
    #[error("invalid layout: {0}")]
    InvalidLayout(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The singular kernel was integrated over a region that touches its pole.
    #[error("kernel integral diverges at x = {x}")]
    DivergentIntegral { x: f64 },

    #[error("quadrature produced a non-finite value for element pair ({ex}, {ey})")]
    QuadratureFailure { ex: usize, ey: usize },

    /// Cholesky pivot was not positive; the reduced matrix is not SPD.
    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("line search failed after {iterations} iterations (gradient norm {grad_norm:e})")]
    LineSearchFailure { iterations: usize, grad_norm: f64 },
}
