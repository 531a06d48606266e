//! Phi-projections of finite discrete measures.
//!
//! The crate computes projections of vectors in `(0,1)^m` onto compact
//! model sets under phi-divergences, the analytic Jacobians of the
//! projection map, and the delta-method asymptotic covariance of projected
//! empirical frequency vectors, together with Monte Carlo verification and
//! diagnostic checks of the underlying regularity conditions.
//!
//! Entry points:
//!
//! - [`divergence::Divergence`] and [`divergence::builtin_divergence`]:
//!   generator bundles with derivatives and boundary limits.
//! - [`models::ParametricModel`]: binomial, moment-constrained, Frechet,
//!   linear-equality and explicit affine model sets.
//! - [`projection::project`], [`projection::project_ipfp`],
//!   [`projection::grid_oracle`]: solvers and the brute-force check.
//! - [`asymptotics::asymptotic_covariance`]: Jacobians and the covariance.
//! - [`montecarlo::empirical_covariance`]: replicate studies.
//! - [`diagnostics`]: condition checks and the uniqueness sweep.

pub mod asymptotics;
pub mod diagnostics;
pub mod divergence;
pub mod error;
pub mod measures;
pub mod models;
pub mod montecarlo;
pub mod projection;
pub mod rng;

pub use asymptotics::{
    asymptotic_covariance, delta_matrix_diag, jacobian_projection, jacobian_theta,
    multinomial_covariance, objective_hessian, AsymptoticResult,
};
pub use divergence::{builtin_divergence, Divergence, ExtendedReal};
pub use error::{Error, Result};
pub use measures::{MeasureVector, ProbabilityVector};
pub use models::{FrechetSpec, LinearInequalities, ParametricModel};
pub use montecarlo::{empirical_covariance, sample_frequencies, ComparisonReport, SimulationConfig};
pub use projection::{
    grid_oracle, objective_and_gradient, project, project_from, project_ipfp, project_multistart,
    IpfpResult, ProjectionResult, SolverOptions,
};
