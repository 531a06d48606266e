//! Analytic derivatives of the projection map and delta-method covariances.
//!
//! For a minimizer `theta* = argmin D(S(theta) | t0)` in the interior of the
//! parameter set, the Hessian of the composed objective is
//!
//! ```text
//! H = J[S]^T diag(phi''(S_i/t_i) / t_i) J[S]
//!     + (I_k (x) phi'-row) J2[S],
//! ```
//!
//! the second (Kronecker) term vanishing for affine maps. When `H` is
//! positive definite the projection parameter is differentiable in the
//! target with
//!
//! ```text
//! J[theta*](t0) = H^{-1} J[S]^T Delta(t0),
//! Delta(t0)     = diag(S_i(theta*) / t_i^2 * phi''(S_i(theta*) / t_i)),
//! J[S*](t0)     = J[S](theta*) J[theta*](t0),
//! ```
//!
//! and the asymptotic covariance of the projected empirical frequency
//! vector is `Sigma = J[S*] Sigma_q0 J[S*]^T` with
//! `Sigma_q0 = diag(q0) - q0 q0^T`.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::divergence::Divergence;
use crate::error::{Error, Result};
use crate::measures::ProbabilityVector;
use crate::models::ParametricModel;
use crate::projection::{project, ProjectionResult, SolverOptions, BOUNDARY_MARGIN};

#[derive(Clone, Debug)]
pub struct AsymptoticResult {
    pub theta_star: DVector<f64>,
    /// Hessian of the composed objective at the minimizer, `k x k`.
    pub hessian: DMatrix<f64>,
    /// Diagonal entries of `Delta(t0)`.
    pub delta: DVector<f64>,
    /// `J[theta*](t0)`, `k x m`.
    pub jac_theta: DMatrix<f64>,
    /// `J[S*](t0)`, `m x m`.
    pub jac_projection: DMatrix<f64>,
    /// Multinomial covariance `diag(q0) - q0 q0^T`.
    pub sigma_q0: DMatrix<f64>,
    /// Delta-method covariance `J[S*] Sigma_q0 J[S*]^T`.
    pub sigma: DMatrix<f64>,
    /// The underlying projection run.
    pub projection: ProjectionResult,
}

fn check_inputs(
    model: &ParametricModel,
    t: &DVector<f64>,
    theta: &DVector<f64>,
) -> Result<DVector<f64>> {
    if t.len() != model.m() {
        return Err(Error::DimensionMismatch {
            expected: model.m(),
            actual: t.len(),
        });
    }
    if theta.len() != model.k() {
        return Err(Error::DimensionMismatch {
            expected: model.k(),
            actual: theta.len(),
        });
    }
    for (i, &v) in t.iter().enumerate() {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::BoundaryInput {
                what: "target",
                index: i,
                value: v,
            });
        }
    }
    if !model.constraints().is_strictly_feasible(theta, 0.0) {
        return Err(Error::BoundaryInput {
            what: "parameter slack",
            index: 0,
            value: model.constraints().min_slack(theta),
        });
    }
    let s = model.eval(theta);
    for (i, &v) in s.iter().enumerate() {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::BoundaryInput {
                what: "model image",
                index: i,
                value: v,
            });
        }
    }
    Ok(s)
}

/// Hessian of `theta -> D(S(theta) | t)` at a strictly interior point.
pub fn objective_hessian(
    div: &Divergence,
    model: &ParametricModel,
    t: &DVector<f64>,
    theta: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    let s = check_inputs(model, t, theta)?;
    hessian_at(div, model, t, theta, &s).ok_or_else(|| {
        Error::InvalidArgument("objective Hessian is not finite at this point".into())
    })
}

/// Internal Hessian evaluation without precondition errors; `None` when the
/// image is not strictly interior or the result is not finite.
pub(crate) fn objective_hessian_unchecked(
    div: &Divergence,
    model: &ParametricModel,
    t: &DVector<f64>,
    theta: &DVector<f64>,
) -> Option<DMatrix<f64>> {
    let s = model.eval(theta);
    if !s.iter().all(|&v| v > 0.0 && v < 1.0) {
        return None;
    }
    hessian_at(div, model, t, theta, &s)
}

fn hessian_at(
    div: &Divergence,
    model: &ParametricModel,
    t: &DVector<f64>,
    theta: &DVector<f64>,
    s: &DVector<f64>,
) -> Option<DMatrix<f64>> {
    let m = model.m();
    let k = model.k();
    let jac = model.jacobian(theta);
    let weights = DVector::from_fn(m, |i, _| div.phi_second(s[i] / t[i]) / t[i]);
    let mut hessian = DMatrix::zeros(k, k);
    for p in 0..k {
        for q in p..k {
            let mut acc = 0.0;
            for i in 0..m {
                acc += jac[(i, p)] * weights[i] * jac[(i, q)];
            }
            hessian[(p, q)] = acc;
            hessian[(q, p)] = acc;
        }
    }
    if !model.is_affine() {
        // Kronecker correction: row j of (I_k (x) phi'-row) J2[S] sums the
        // phi' vector against the second derivatives of block j.
        let phi_prime = DVector::from_fn(m, |i, _| div.phi_prime(s[i] / t[i]));
        let stack = model.second_jacobian(theta);
        for j in 0..k {
            for l in 0..k {
                let mut acc = 0.0;
                for i in 0..m {
                    acc += phi_prime[i] * stack[(j * m + i, l)];
                }
                hessian[(j, l)] += acc;
            }
        }
        // Restore exact symmetry lost to rounding in the correction.
        for p in 0..k {
            for q in (p + 1)..k {
                let avg = 0.5 * (hessian[(p, q)] + hessian[(q, p)]);
                hessian[(p, q)] = avg;
                hessian[(q, p)] = avg;
            }
        }
    }
    hessian.iter().all(|v| v.is_finite()).then_some(hessian)
}

/// Diagonal of `Delta(t0)`: entry `i` is
/// `S_i(theta*) / t_i^2 * phi''(S_i(theta*) / t_i)`.
pub fn delta_matrix_diag(
    div: &Divergence,
    model: &ParametricModel,
    t0: &DVector<f64>,
    theta_star: &DVector<f64>,
) -> Result<DVector<f64>> {
    let s = check_inputs(model, t0, theta_star)?;
    Ok(DVector::from_fn(model.m(), |i, _| {
        s[i] / (t0[i] * t0[i]) * div.phi_second(s[i] / t0[i])
    }))
}

/// `J[theta*](t0)`: solves the Hessian system against `J[S]^T Delta(t0)`.
///
/// The Hessian is factored by Cholesky; failure of the factorization is the
/// condition 10 gate. Affine models reach the same value through the same
/// formula since their Kronecker term is identically zero.
pub fn jacobian_theta(
    div: &Divergence,
    model: &ParametricModel,
    t0: &DVector<f64>,
    theta_star: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    let hessian = objective_hessian(div, model, t0, theta_star)?;
    let delta = delta_matrix_diag(div, model, t0, theta_star)?;
    solve_jacobian_theta(model, t0, theta_star, hessian, &delta)
}

/// Reference magnitude for Hessian eigenvalue gates: the largest eigenvalue
/// of the composed Hessian with the generator curvature replaced by one.
/// Anchors the positive-definiteness test so that a Hessian that is tiny
/// because `phi''` collapses at the minimizer (rather than well-conditioned
/// at a small scale) is rejected.
pub(crate) fn hessian_scale_reference(
    model: &ParametricModel,
    t: &DVector<f64>,
    theta: &DVector<f64>,
) -> f64 {
    let jac = model.jacobian(theta);
    let unit_diag = DMatrix::from_diagonal(&DVector::from_fn(model.m(), |i, _| 1.0 / t[i]));
    let unit_hessian = jac.transpose() * unit_diag * jac;
    unit_hessian.symmetric_eigen().eigenvalues.max()
}

fn solve_jacobian_theta(
    model: &ParametricModel,
    t0: &DVector<f64>,
    theta_star: &DVector<f64>,
    hessian: DMatrix<f64>,
    delta: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    // Positive definiteness gate. Cholesky alone is not a reliable signal:
    // it can run to completion on a singular positive semidefinite matrix.
    // The threshold is anchored to the unit-curvature Hessian scale so that
    // degenerate generators (curvature vanishing at the minimizer) fail
    // even though their tiny Hessian is formally well-conditioned.
    let eigenvalues = hessian.clone().symmetric_eigen().eigenvalues;
    let min_eigenvalue = eigenvalues.min();
    let max_eigenvalue = eigenvalues.max();
    let scale = max_eigenvalue.max(hessian_scale_reference(model, t0, theta_star));
    if max_eigenvalue.is_nan() || max_eigenvalue <= 0.0 || min_eigenvalue <= 1e-10 * scale {
        return Err(Error::InvertibilityViolation { min_eigenvalue });
    }
    let chol = match Cholesky::new(hessian) {
        Some(c) => c,
        None => return Err(Error::InvertibilityViolation { min_eigenvalue }),
    };
    let jac = model.jacobian(theta_star);
    let mut rhs = jac.transpose();
    for i in 0..model.m() {
        let scale = delta[i];
        for p in 0..model.k() {
            rhs[(p, i)] *= scale;
        }
    }
    Ok(chol.solve(&rhs))
}

/// `J[S*](t0) = J[S](theta*) J[theta*](t0)`.
pub fn jacobian_projection(
    div: &Divergence,
    model: &ParametricModel,
    t0: &DVector<f64>,
    theta_star: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    let jt = jacobian_theta(div, model, t0, theta_star)?;
    Ok(model.jacobian(theta_star) * jt)
}

/// Covariance of the empirical frequency vector of `n` categorical draws,
/// scaled by `n`: `diag(q0) - q0 q0^T`.
pub fn multinomial_covariance(q0: &ProbabilityVector) -> DMatrix<f64> {
    let m = q0.len();
    let q = q0.entries();
    DMatrix::from_fn(m, m, |i, j| {
        let outer = q[i] * q[j];
        if i == j {
            q[i] - outer
        } else {
            -outer
        }
    })
}

/// Full pipeline at a probability target: project, differentiate, and
/// propagate the multinomial covariance. Fails loudly when the projection
/// violates the interiority (condition 9), invertibility (condition 10) or
/// support (condition 12) gates.
pub fn asymptotic_covariance(
    div: &Divergence,
    model: &ParametricModel,
    q0: &ProbabilityVector,
    opts: &SolverOptions,
) -> Result<AsymptoticResult> {
    let projection = project(div, model, q0.as_measure(), opts)?;
    // Boundary gates come before the convergence gate: a minimizer pinned to
    // the boundary never satisfies the interior first-order condition, and
    // the interesting diagnosis is the violated condition, not the solver.
    if projection.parameter_on_boundary(model) {
        return Err(Error::InteriorMinimizer {
            margin: BOUNDARY_MARGIN,
        });
    }
    if let Some(i) = (0..projection.s_star.len()).find(|&i| {
        projection.s_star.get(i) <= BOUNDARY_MARGIN
            || projection.s_star.get(i) >= 1.0 - BOUNDARY_MARGIN
    }) {
        return Err(Error::SupportViolation {
            index: i,
            value: projection.s_star.get(i),
        });
    }
    if !projection.converged {
        return Err(Error::NoConvergence {
            iterations: projection.iterations,
            gradient_norm: projection.gradient_norm,
        });
    }

    let t0 = q0.entries();
    let theta_star = projection.theta_star.clone();
    let hessian = objective_hessian(div, model, t0, &theta_star)?;
    let delta = delta_matrix_diag(div, model, t0, &theta_star)?;
    let jac_theta = solve_jacobian_theta(model, t0, &theta_star, hessian.clone(), &delta)?;
    let jac_projection = model.jacobian(&theta_star) * &jac_theta;
    let sigma_q0 = multinomial_covariance(q0);
    let mut sigma = &jac_projection * &sigma_q0 * jac_projection.transpose();
    // Symmetrize away the rounding skew of the triple product.
    for i in 0..sigma.nrows() {
        for j in (i + 1)..sigma.ncols() {
            let avg = 0.5 * (sigma[(i, j)] + sigma[(j, i)]);
            sigma[(i, j)] = avg;
            sigma[(j, i)] = avg;
        }
    }
    Ok(AsymptoticResult {
        theta_star,
        hessian,
        delta,
        jac_theta,
        jac_projection,
        sigma_q0,
        sigma,
        projection,
    })
}
