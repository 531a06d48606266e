//! Crate-wide error type.
//!
//! Condition violations carry the condition number used throughout the
//! diagnostics and the CLI exit-code contract: condition 9 (unique interior
//! minimizer), condition 10 (positive-definite objective Hessian) and
//! condition 12 (full-support projection).

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown divergence `{0}`")]
    UnknownDivergence(String),

    #[error("invalid alpha {0}: the alpha-divergence family requires alpha < 3 and alpha != -1, 1")]
    InvalidAlpha(f64),

    #[error("divergence kernel requires nonnegative inputs, got ({v}, {w})")]
    NegativeKernelInput { v: f64, w: f64 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("{what} must lie strictly inside (0, 1): component {index} is {value}")]
    BoundaryInput {
        what: &'static str,
        index: usize,
        value: f64,
    },

    #[error("measure entries must lie in [0, 1]: component {index} is {value}")]
    InvalidMeasure { index: usize, value: f64 },

    #[error("probability vector must sum to 1 within 1e-12, sum is {0}")]
    NotAProbability(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("support points must be pairwise distinct: x[{i}] equals x[{j}]")]
    DuplicateSupportPoint { i: usize, j: usize },

    #[error("Vandermonde system is ill-conditioned: condition estimate {0:.3e} exceeds 1e12")]
    IllConditioned(f64),

    #[error("linear equalities pin the model to a single point; a model set must not be a singleton")]
    SingletonModel,

    #[error("base point is infeasible: {0}")]
    InfeasibleBasePoint(String),

    #[error("model parameter set has no strictly feasible point: {0}")]
    InfeasibleModel(String),

    #[error("model map is rank-deficient at the interior point: smallest singular value {0:.3e}")]
    RankDeficient(f64),

    #[error("operation requires an affine model")]
    NotAffine,

    #[error("vector is not in the model set: residual {residual:.3e} exceeds {tolerance:.0e}")]
    NotInModel { residual: f64, tolerance: f64 },

    #[error("grid oracle supports parameter dimension k <= 3, got k = {0}")]
    GridDimension(usize),

    #[error("solver did not converge after {iterations} iterations (gradient norm {gradient_norm:.3e})")]
    NoConvergence {
        iterations: usize,
        gradient_norm: f64,
    },

    #[error(
        "condition 9 violated (unique interior minimizer): the projection parameter lies within \
         {margin:.0e} of the parameter-set boundary"
    )]
    InteriorMinimizer { margin: f64 },

    #[error(
        "condition 10 violated (invertibility): the objective Hessian at the minimizer is not \
         positive definite (smallest eigenvalue {min_eigenvalue:.3e})"
    )]
    InvertibilityViolation { min_eigenvalue: f64 },

    #[error(
        "condition 12 violated (full support): projected component {index} is {value:.3e}, \
         outside (0, 1)"
    )]
    SupportViolation { index: usize, value: f64 },

    #[error("{skipped} of {total} replicates had empty cells, more than the 1% degeneracy budget")]
    DataDegeneracy { skipped: usize, total: usize },
}

impl Error {
    /// Number of the violated condition, when the error is a condition gate.
    pub fn violated_condition(&self) -> Option<u8> {
        match self {
            Error::InteriorMinimizer { .. } => Some(9),
            Error::InvertibilityViolation { .. } => Some(10),
            Error::SupportViolation { .. } => Some(12),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
