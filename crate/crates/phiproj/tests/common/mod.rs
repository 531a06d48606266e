//! Shared fixtures and finite-difference oracles for the integration suites.
//!
//! Each integration test target compiles this module independently, so not
//! every helper is used by every target.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use phiproj::divergence::ExtendedReal;
use phiproj::*;

pub fn binomial_instance() -> (Divergence, ParametricModel, ProbabilityVector) {
    (
        Divergence::pearson_chi2(),
        ParametricModel::binomial(3).unwrap(),
        ProbabilityVector::new(vec![0.1, 0.2, 0.7]).unwrap(),
    )
}

pub fn moment_model() -> ParametricModel {
    ParametricModel::moments(&[0.0, 1.0, 2.0, 3.0, 4.0], &[1.0, 1.6, 3.52]).unwrap()
}

pub fn moment_target() -> ProbabilityVector {
    ProbabilityVector::new(vec![0.35, 0.3, 0.15, 0.1, 0.1]).unwrap()
}

pub fn frechet_spec() -> FrechetSpec {
    FrechetSpec::new(
        ProbabilityVector::new(vec![0.2, 0.3, 0.5]).unwrap(),
        ProbabilityVector::new(vec![0.5, 0.25, 0.25]).unwrap(),
    )
    .unwrap()
}

/// Column-major vectorization of the projected bivariate array.
pub fn frechet_target() -> ProbabilityVector {
    ProbabilityVector::new(vec![0.04, 0.11, 0.13, 0.10, 0.07, 0.08, 0.14, 0.12, 0.21]).unwrap()
}

/// The quartic generator whose curvature vanishes at 1.
pub fn quartic_divergence() -> Divergence {
    Divergence::custom(
        "quartic",
        |x| (x - 1.0).powi(4),
        |x| 4.0 * (x - 1.0).powi(3),
        |x| 12.0 * (x - 1.0) * (x - 1.0),
        1.0,
        ExtendedReal::Infinite,
        -4.0,
    )
    .unwrap()
}

/// The segment model `S(theta) = (theta, theta, 1 - 2 theta)` on `[0, 1/2]`.
pub fn segment_model() -> ParametricModel {
    let a = DMatrix::from_column_slice(3, 1, &[1.0, 1.0, -2.0]);
    let gamma = DVector::from_vec(vec![0.0, 0.0, 1.0]);
    ParametricModel::affine(a, gamma, None, None).unwrap()
}

/// Re-solve finite-difference Jacobian of the projection parameter map and
/// of the projection map, with tightened inner solves warm-started at the
/// base optimum.
pub fn fd_projection_jacobians(
    div: &Divergence,
    model: &ParametricModel,
    t0: &DVector<f64>,
    base_theta: &DVector<f64>,
    step: f64,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let tight = SolverOptions {
        gradient_tol: 1e-12,
        multistart_count: 1,
        ..Default::default()
    };
    let m = model.m();
    let k = model.k();
    let mut jac_theta = DMatrix::zeros(k, m);
    let mut jac_projection = DMatrix::zeros(m, m);
    for j in 0..m {
        let mut up = t0.clone();
        let mut dn = t0.clone();
        up[j] += step;
        dn[j] -= step;
        let r_up = project_from(
            div,
            model,
            &MeasureVector::from_dvector(up).unwrap(),
            base_theta,
            &tight,
        )
        .unwrap();
        let r_dn = project_from(
            div,
            model,
            &MeasureVector::from_dvector(dn).unwrap(),
            base_theta,
            &tight,
        )
        .unwrap();
        for i in 0..k {
            jac_theta[(i, j)] = (r_up.theta_star[i] - r_dn.theta_star[i]) / (2.0 * step);
        }
        for i in 0..m {
            jac_projection[(i, j)] =
                (r_up.s_star.get(i) - r_dn.s_star.get(i)) / (2.0 * step);
        }
    }
    (jac_theta, jac_projection)
}

pub fn relative_frobenius_gap(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / a.norm().max(1e-300)
}

pub fn round_to(value: f64, decimals: i32) -> f64 {
    let scale = 10f64.powi(decimals);
    (value * scale).round() / scale
}
