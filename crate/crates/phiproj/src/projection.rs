//! Projection solvers: minimize `theta -> D(S(theta) | t)` over the
//! parameter polytope.
//!
//! The general path is a damped Newton method on the log-barrier-augmented
//! objective, with the barrier weight shrunk geometrically, followed by a
//! Newton polish on the raw objective inside the strictly feasible region.
//! One-parameter models use a safeguarded Newton/bisection instead. A
//! brute-force grid oracle and the iterative proportional fitting procedure
//! (Sinkhorn scaling) for Kullback-Leibler projections onto Frechet classes
//! round out the module.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::asymptotics::objective_hessian_unchecked;
use crate::divergence::Divergence;
use crate::error::{Error, Result};
use crate::measures::MeasureVector;
use crate::models::{LinearInequalities, ParametricModel};
use crate::rng::SplitMix64;

/// Entries of the projected vector (or parameter slacks) closer than this to
/// the boundary raise the boundary flag.
pub const BOUNDARY_MARGIN: f64 = 1e-7;

/// Margin discrepancy at which Sinkhorn scaling stops.
pub const IPFP_TOL: f64 = 1e-12;

const ARMIJO_C: f64 = 1e-4;
const ARMIJO_SHRINK: f64 = 0.5;
const MAX_BACKTRACKS: usize = 60;
const BARRIER_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct SolverOptions {
    /// Infinity-norm gradient threshold certifying convergence.
    pub gradient_tol: f64,
    /// Total Newton iteration budget across barrier stages and polish.
    pub max_iterations: usize,
    /// Initial barrier weight.
    pub barrier_initial: f64,
    /// Geometric shrink factor applied to the barrier weight per stage.
    pub barrier_shrink: f64,
    /// Number of starts: one deterministic plus `multistart_count - 1`
    /// random strictly feasible parameters.
    pub multistart_count: usize,
    /// Seed for the random starts.
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            gradient_tol: 1e-10,
            max_iterations: 500,
            barrier_initial: 1.0,
            barrier_shrink: 0.1,
            multistart_count: 5,
            seed: 0,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = self.gradient_tol > 0.0
            && self.max_iterations > 0
            && self.barrier_initial > 0.0
            && self.barrier_shrink > 0.0
            && self.barrier_shrink < 1.0
            && self.multistart_count > 0;
        if positive {
            Ok(())
        } else {
            Err(Error::InvalidArgument(
                "solver options must be positive (and barrier_shrink < 1)".into(),
            ))
        }
    }
}

#[derive(Clone, Debug)]
pub struct ProjectionResult {
    pub theta_star: DVector<f64>,
    pub s_star: MeasureVector,
    /// Divergence value at the minimizer.
    pub objective: f64,
    /// Infinity norm of the objective gradient at the minimizer.
    pub gradient_norm: f64,
    pub iterations: usize,
    /// Set when the projected vector or the parameter sits within
    /// [`BOUNDARY_MARGIN`] of the feasible boundary.
    pub boundary_flag: bool,
    pub converged: bool,
}

impl ProjectionResult {
    /// True when the parameter (not the image) triggered the boundary flag.
    pub fn parameter_on_boundary(&self, model: &ParametricModel) -> bool {
        model.constraints().min_slack(&self.theta_star) <= BOUNDARY_MARGIN
    }
}

/// Objective value and gradient of `theta -> D(S(theta) | t)` at a strictly
/// interior point.
pub fn objective_and_gradient(
    div: &Divergence,
    model: &ParametricModel,
    t: &DVector<f64>,
    theta: &DVector<f64>,
) -> Result<(f64, DVector<f64>)> {
    check_target_interior(model, t)?;
    if !model.constraints().is_strictly_feasible(theta, 0.0) {
        return Err(Error::BoundaryInput {
            what: "parameter",
            index: 0,
            value: model.constraints().min_slack(theta),
        });
    }
    value_and_gradient(div, model, t, theta).ok_or(Error::BoundaryInput {
        what: "model image",
        index: 0,
        value: 0.0,
    })
}

/// Projects `t` onto the model set, taking the best of the multistart runs.
pub fn project(
    div: &Divergence,
    model: &ParametricModel,
    t: &MeasureVector,
    opts: &SolverOptions,
) -> Result<ProjectionResult> {
    let runs = project_multistart(div, model, t, opts)?;
    Ok(select_best(runs))
}

/// All multistart runs, in start order. The first start is deterministic
/// (for affine models, the parameter of the Euclidean projection of `t`
/// onto the affine hull, pulled toward the interior point until strictly
/// feasible); the rest are random strictly feasible parameters.
pub fn project_multistart(
    div: &Divergence,
    model: &ParametricModel,
    t: &MeasureVector,
    opts: &SolverOptions,
) -> Result<Vec<ProjectionResult>> {
    opts.validate()?;
    if t.len() != model.m() {
        return Err(Error::DimensionMismatch {
            expected: model.m(),
            actual: t.len(),
        });
    }
    if !t.is_interior() {
        let bad = (0..t.len()).find(|&i| !(t.get(i) > 0.0 && t.get(i) < 1.0));
        let index = bad.unwrap_or(0);
        return Err(Error::BoundaryInput {
            what: "projection target",
            index,
            value: t.get(index),
        });
    }
    let tv = t.entries();
    let mut runs = Vec::with_capacity(opts.multistart_count);
    for start_index in 0..opts.multistart_count {
        let theta0 = if start_index == 0 {
            deterministic_start(model, tv)
        } else {
            random_interior_start(model, opts.seed, start_index as u64)
        };
        let run = minimize_from(div, model, tv, theta0, opts)?;
        runs.push(finish_run(model, run)?);
    }
    Ok(runs)
}

/// Single-start solve from a caller-supplied strictly feasible parameter.
pub fn project_from(
    div: &Divergence,
    model: &ParametricModel,
    t: &MeasureVector,
    theta0: &DVector<f64>,
    opts: &SolverOptions,
) -> Result<ProjectionResult> {
    opts.validate()?;
    if !model.constraints().is_strictly_feasible(theta0, 0.0) {
        return Err(Error::InfeasibleBasePoint(format!(
            "start has slack {:.3e}",
            model.constraints().min_slack(theta0)
        )));
    }
    let run = minimize_from(div, model, t.entries(), theta0.clone(), opts)?;
    finish_run(model, run)
}

fn select_best(mut runs: Vec<ProjectionResult>) -> ProjectionResult {
    // Lowest objective wins; near-ties resolved by lexicographically
    // smallest parameter so reruns are reproducible.
    let mut best = runs.remove(0);
    for run in runs {
        let better = run.objective < best.objective - 1e-12
            || ((run.objective - best.objective).abs() <= 1e-12
                && lexicographically_smaller(&run.theta_star, &best.theta_star));
        if better {
            best = run;
        }
    }
    best
}

fn lexicographically_smaller(a: &DVector<f64>, b: &DVector<f64>) -> bool {
    for i in 0..a.len() {
        if a[i] < b[i] {
            return true;
        }
        if a[i] > b[i] {
            return false;
        }
    }
    false
}

fn check_target_interior(model: &ParametricModel, t: &DVector<f64>) -> Result<()> {
    if t.len() != model.m() {
        return Err(Error::DimensionMismatch {
            expected: model.m(),
            actual: t.len(),
        });
    }
    for (i, &v) in t.iter().enumerate() {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::BoundaryInput {
                what: "projection target",
                index: i,
                value: v,
            });
        }
    }
    Ok(())
}

/// Finite objective at a feasible parameter, `None` when the parameter is
/// infeasible or the divergence is infinite there. Images that drift out of
/// `[0, 1]` by rounding are clamped.
fn objective_value(
    div: &Divergence,
    model: &ParametricModel,
    t: &DVector<f64>,
    theta: &DVector<f64>,
) -> Option<f64> {
    if model.constraints().min_slack(theta) < 0.0 {
        return None;
    }
    let s = model.eval(theta);
    let mut total = 0.0;
    for i in 0..s.len() {
        let v = s[i].clamp(0.0, 1.0);
        if (v - s[i]).abs() > 1e-9 {
            return None;
        }
        match div.f_eval(v, t[i]).ok()? {
            crate::divergence::ExtendedReal::Finite(x) => total += x,
            crate::divergence::ExtendedReal::Infinite => return None,
        }
    }
    total.is_finite().then_some(total)
}

/// Objective and gradient when the image is strictly interior, else `None`.
fn value_and_gradient(
    div: &Divergence,
    model: &ParametricModel,
    t: &DVector<f64>,
    theta: &DVector<f64>,
) -> Option<(f64, DVector<f64>)> {
    let s = model.eval(theta);
    if !s.iter().all(|&v| v > 0.0 && v < 1.0) {
        return None;
    }
    let mut value = 0.0;
    let mut phi_prime = DVector::zeros(s.len());
    for i in 0..s.len() {
        let ratio = s[i] / t[i];
        value += t[i] * div.phi(ratio);
        phi_prime[i] = div.phi_prime(ratio);
    }
    let grad = model.jacobian(theta).transpose() * phi_prime;
    (value.is_finite() && grad.iter().all(|g| g.is_finite())).then_some((value, grad))
}

/// Largest step along `direction` keeping all slacks positive, shortened by
/// a fraction-to-boundary factor.
fn max_feasible_step(
    constraints: &LinearInequalities,
    theta: &DVector<f64>,
    direction: &DVector<f64>,
) -> f64 {
    let along = constraints.coeffs() * direction;
    let slacks = constraints.slacks(theta);
    let mut step = f64::INFINITY;
    for j in 0..along.len() {
        if along[j] > 1e-300 {
            step = step.min(slacks[j] / along[j]);
        }
    }
    0.99 * step
}

struct SolveRun {
    theta: DVector<f64>,
    objective: f64,
    gradient_norm: f64,
    iterations: usize,
    converged: bool,
    /// `(stage, merit_before, merit_after)` per accepted step; merit is the
    /// barrier-augmented objective within a stage and the raw objective in
    /// the polish stage.
    trace: Vec<(usize, f64, f64)>,
}

fn minimize_from(
    div: &Divergence,
    model: &ParametricModel,
    t: &DVector<f64>,
    theta0: DVector<f64>,
    opts: &SolverOptions,
) -> Result<SolveRun> {
    if model.k() == 1 {
        minimize_scalar(div, model, t, theta0, opts)
    } else {
        minimize_barrier_newton(div, model, t, theta0, opts)
    }
}

fn minimize_barrier_newton(
    div: &Divergence,
    model: &ParametricModel,
    t: &DVector<f64>,
    mut theta: DVector<f64>,
    opts: &SolverOptions,
) -> Result<SolveRun> {
    let constraints = model.constraints();
    let k = model.k();
    let mut iterations = 0usize;
    let mut trace = Vec::new();
    let mut stage = 0usize;

    let barrier_merit = |theta: &DVector<f64>, mu: f64| -> Option<f64> {
        let raw = objective_value(div, model, t, theta)?;
        let slacks = constraints.slacks(theta);
        if slacks.iter().any(|&s| s <= 0.0) {
            return None;
        }
        Some(raw - mu * slacks.iter().map(|s| s.ln()).sum::<f64>())
    };

    let mut mu = opts.barrier_initial;
    let mut raw_gradient_met = false;
    while mu > BARRIER_FLOOR && iterations < opts.max_iterations && !raw_gradient_met {
        let inner_tol = (0.1 * mu).max(opts.gradient_tol);
        let mut stage_steps = 0usize;
        loop {
            if iterations >= opts.max_iterations || stage_steps >= 50 {
                break;
            }
            let Some((_, grad)) = value_and_gradient(div, model, t, &theta) else {
                break;
            };
            if grad.amax() <= opts.gradient_tol {
                // The raw first-order condition already holds; the barrier
                // path has nothing left to do.
                raw_gradient_met = true;
                break;
            }
            let slacks = constraints.slacks(&theta);
            let inv_slack = DVector::from_fn(slacks.len(), |j, _| 1.0 / slacks[j]);
            let barrier_grad = &grad + constraints.coeffs().transpose() * &inv_slack * mu;
            if barrier_grad.amax() <= inner_tol {
                break;
            }
            let hess = objective_hessian_unchecked(div, model, t, &theta)
                .unwrap_or_else(|| DMatrix::zeros(k, k));
            let mut barrier_hess = hess;
            for j in 0..slacks.len() {
                let row = constraints.coeffs().row(j);
                let weight = mu / (slacks[j] * slacks[j]);
                for p in 0..k {
                    for q in 0..k {
                        barrier_hess[(p, q)] += weight * row[p] * row[q];
                    }
                }
            }
            let direction = Cholesky::new(barrier_hess)
                .map(|c| c.solve(&(-&barrier_grad)))
                .unwrap_or_else(|| -&barrier_grad);
            let descent_slope = barrier_grad.dot(&direction);
            if !descent_slope.is_finite() || descent_slope >= 0.0 {
                break;
            }
            let Some(current) = barrier_merit(&theta, mu) else {
                break;
            };
            let mut alpha = max_feasible_step(constraints, &theta, &direction).min(1.0);
            let mut accepted = false;
            for _ in 0..MAX_BACKTRACKS {
                if alpha <= 0.0 {
                    break;
                }
                let candidate = &theta + &direction * alpha;
                if let Some(merit) = barrier_merit(&candidate, mu) {
                    if merit <= current + ARMIJO_C * alpha * descent_slope {
                        trace.push((stage, current, merit));
                        theta = candidate;
                        accepted = true;
                        break;
                    }
                }
                alpha *= ARMIJO_SHRINK;
            }
            iterations += 1;
            stage_steps += 1;
            if !accepted || alpha * direction.amax() <= 1e-15 * (1.0 + theta.amax()) {
                break;
            }
        }
        mu *= opts.barrier_shrink;
        stage += 1;
    }

    // Polish on the raw objective; the line search keeps strict feasibility.
    // Near the optimum the Armijo decrement sinks below objective rounding
    // noise, so the endgame accepts steps on gradient-norm decrease, which
    // Newton certifies long after objective differences vanish.
    let polish_stage = stage;
    let mut gradient_norm = f64::INFINITY;
    let mut converged = false;
    while iterations < opts.max_iterations {
        let Some((value, grad)) = value_and_gradient(div, model, t, &theta) else {
            break;
        };
        gradient_norm = grad.amax();
        if gradient_norm <= opts.gradient_tol {
            converged = true;
            break;
        }
        let direction = objective_hessian_unchecked(div, model, t, &theta)
            .and_then(Cholesky::new)
            .map(|c| c.solve(&(-&grad)))
            .unwrap_or_else(|| -&grad);
        let descent_slope = grad.dot(&direction);
        if !descent_slope.is_finite() || descent_slope >= 0.0 {
            break;
        }
        let alpha0 = max_feasible_step(constraints, &theta, &direction).min(1.0);
        let value_noise = 1e-15 * (1.0 + value.abs());
        let mut alpha = alpha0;
        let mut accepted = false;
        if -ARMIJO_C * alpha0 * descent_slope > value_noise {
            for _ in 0..MAX_BACKTRACKS {
                if alpha <= 0.0 {
                    break;
                }
                let candidate = &theta + &direction * alpha;
                if let Some(next) = objective_value(div, model, t, &candidate) {
                    if next <= value + ARMIJO_C * alpha * descent_slope
                        && value_and_gradient(div, model, t, &candidate).is_some()
                    {
                        trace.push((polish_stage, value, next));
                        theta = candidate;
                        accepted = true;
                        break;
                    }
                }
                alpha *= ARMIJO_SHRINK;
            }
        } else {
            for _ in 0..MAX_BACKTRACKS {
                if alpha <= 0.0 {
                    break;
                }
                let candidate = &theta + &direction * alpha;
                if let Some((next, next_grad)) = value_and_gradient(div, model, t, &candidate) {
                    if next_grad.amax() < gradient_norm {
                        trace.push((polish_stage, value, next));
                        theta = candidate;
                        accepted = true;
                        break;
                    }
                }
                alpha *= ARMIJO_SHRINK;
            }
        }
        iterations += 1;
        if !accepted || alpha * direction.amax() <= 1e-16 * (1.0 + theta.amax()) {
            if let Some((_, grad)) = value_and_gradient(div, model, t, &theta) {
                gradient_norm = grad.amax();
                converged = gradient_norm <= opts.gradient_tol;
            }
            break;
        }
    }

    let objective = objective_value(div, model, t, &theta)
        .ok_or_else(|| Error::InfeasibleModel("objective not finite at solution".into()))?;
    if let Some((_, grad)) = value_and_gradient(div, model, t, &theta) {
        gradient_norm = grad.amax();
        converged = gradient_norm <= opts.gradient_tol;
    }
    Ok(SolveRun {
        theta,
        objective,
        gradient_norm,
        iterations,
        converged,
        trace,
    })
}

/// Safeguarded Newton/bisection for one-parameter models: brackets a sign
/// change of the objective derivative on the feasible interval, then mixes
/// curvature-based Newton candidates (safeguarded to the open bracket) with
/// bisection. The incumbent best objective is tracked separately so the
/// accepted-step objective sequence is non-increasing.
fn minimize_scalar(
    div: &Divergence,
    model: &ParametricModel,
    t: &DVector<f64>,
    theta0: DVector<f64>,
    opts: &SolverOptions,
) -> Result<SolveRun> {
    const EDGE: f64 = 1e-9;
    let (mut lo, mut hi) = scalar_interval(model.constraints())?;
    lo += EDGE;
    hi -= EDGE;
    if lo >= hi {
        return Err(Error::InfeasibleModel(
            "parameter interval has empty interior".into(),
        ));
    }
    let grad_at = |x: f64| -> Option<f64> {
        value_and_gradient(div, model, t, &DVector::from_element(1, x)).map(|(_, g)| g[0])
    };
    let value_at =
        |x: f64| -> Option<f64> { objective_value(div, model, t, &DVector::from_element(1, x)) };

    let mut iterations = 0usize;
    let mut trace = Vec::new();
    let g_lo = grad_at(lo);
    let g_hi = grad_at(hi);

    // Derivative does not change sign: the minimum sits at (or beyond) an
    // endpoint of the shrunken interval.
    let endpoint = match (g_lo, g_hi) {
        (Some(gl), _) if gl >= 0.0 => Some(lo),
        (_, Some(gh)) if gh <= 0.0 => Some(hi),
        _ => None,
    };
    if let Some(x) = endpoint {
        let objective = value_at(x)
            .ok_or_else(|| Error::InfeasibleModel("objective not finite at endpoint".into()))?;
        let gradient_norm = grad_at(x).map(f64::abs).unwrap_or(f64::INFINITY);
        return Ok(SolveRun {
            theta: DVector::from_element(1, x),
            objective,
            gradient_norm,
            iterations: 1,
            converged: gradient_norm <= opts.gradient_tol,
            trace,
        });
    }

    // Establish a sign-change bracket [a, b] with g(a) < 0 < g(b).
    let (mut a, mut b) = match (g_lo, g_hi) {
        (Some(gl), Some(gh)) if gl < 0.0 && gh > 0.0 => (lo, hi),
        _ => scan_for_bracket(lo, hi, &grad_at)
            .ok_or_else(|| Error::InfeasibleModel("no interior stationary point found".into()))?,
    };

    let mut x = theta0[0].clamp(a, b);
    let mut g_x = match grad_at(x) {
        Some(g) => g,
        None => {
            x = 0.5 * (a + b);
            grad_at(x).ok_or_else(|| {
                Error::InfeasibleModel("objective not differentiable inside bracket".into())
            })?
        }
    };
    let mut best_value = value_at(x)
        .ok_or_else(|| Error::InfeasibleModel("objective not finite inside bracket".into()))?;
    // Near the root the objective is flat to rounding, so the returned point
    // is selected by smallest derivative magnitude, which stays informative
    // down to the absolute noise floor of the gradient sum.
    let mut best_grad_x = x;
    let mut best_grad_abs = g_x.abs();
    let mut width = b - a;

    while iterations < opts.max_iterations {
        iterations += 1;
        if g_x < 0.0 {
            a = x;
        } else {
            b = x;
        }
        width = b - a;
        if width <= 1e-13 * (1.0 + x.abs()) {
            break;
        }
        // Newton candidate from the analytic curvature on odd iterations,
        // safeguarded to the open bracket; plain bisection on even ones so
        // the bracket width decays geometrically no matter how degenerate
        // the curvature is.
        let mut next = f64::NAN;
        if iterations % 2 == 1 {
            let hess = objective_hessian_unchecked(div, model, t, &DVector::from_element(1, x))
                .map(|h| h[(0, 0)]);
            if let Some(h) = hess {
                if h > 0.0 {
                    next = x - g_x / h;
                }
            }
        }
        if !next.is_finite() || next <= a || next >= b {
            next = 0.5 * (a + b);
        }
        let Some(g_next) = grad_at(next) else {
            break;
        };
        x = next;
        g_x = g_next;
        if g_x.abs() < best_grad_abs {
            best_grad_abs = g_x.abs();
            best_grad_x = x;
        }
        if let Some(v) = value_at(x) {
            if v <= best_value {
                trace.push((0, best_value, v));
                best_value = v;
            }
        }
    }

    let theta = best_grad_x;
    let objective = value_at(theta)
        .ok_or_else(|| Error::InfeasibleModel("objective not finite at solution".into()))?;
    Ok(SolveRun {
        theta: DVector::from_element(1, theta),
        objective,
        gradient_norm: best_grad_abs,
        iterations,
        converged: best_grad_abs <= opts.gradient_tol || width <= 1e-12 * (1.0 + theta.abs()),
        trace,
    })
}

fn scalar_interval(constraints: &LinearInequalities) -> Result<(f64, f64)> {
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for j in 0..constraints.len() {
        let c = constraints.coeffs()[(j, 0)];
        let u = constraints.bounds()[j];
        if c > 0.0 {
            hi = hi.min(u / c);
        } else if c < 0.0 {
            lo = lo.max(u / c);
        } else if u < 0.0 {
            return Err(Error::InfeasibleModel("contradictory constraint row".into()));
        }
    }
    if !lo.is_finite() || !hi.is_finite() || lo >= hi {
        return Err(Error::InfeasibleModel(
            "one-dimensional parameter set is unbounded or empty".into(),
        ));
    }
    Ok((lo, hi))
}

fn scan_for_bracket(
    lo: f64,
    hi: f64,
    grad_at: &impl Fn(f64) -> Option<f64>,
) -> Option<(f64, f64)> {
    const SCAN: usize = 64;
    let mut prev: Option<(f64, f64)> = None;
    for i in 0..=SCAN {
        let x = lo + (hi - lo) * (i as f64) / (SCAN as f64);
        if let Some(g) = grad_at(x) {
            if let Some((px, pg)) = prev {
                if pg < 0.0 && g >= 0.0 {
                    return Some((px, x));
                }
            }
            prev = Some((x, g));
        }
    }
    None
}

fn deterministic_start(model: &ParametricModel, t: &DVector<f64>) -> DVector<f64> {
    let interior = model.interior_point().clone();
    let Some((a, gamma)) = model.affine_data() else {
        return interior;
    };
    // Parameter of the Euclidean projection of t onto the affine hull.
    let gram = a.transpose() * a;
    let Some(chol) = Cholesky::new(gram) else {
        return interior;
    };
    let mut theta = chol.solve(&(a.transpose() * (t - gamma)));
    // Pull toward the certified interior point until strictly feasible.
    let scale = 1.0 + model.constraints().bounds().amax();
    for _ in 0..200 {
        if model
            .constraints()
            .is_strictly_feasible(&theta, 1e-12 * scale)
        {
            return theta;
        }
        theta = (&theta + &interior) * 0.5;
    }
    interior
}

fn random_interior_start(model: &ParametricModel, seed: u64, start_index: u64) -> DVector<f64> {
    let mut rng = SplitMix64::stream(seed, start_index);
    let interior = model.interior_point();
    let k = model.k();
    for _ in 0..32 {
        let mut direction = DVector::from_fn(k, |_, _| rng.next_standard_normal());
        let norm = direction.norm();
        if norm == 0.0 {
            continue;
        }
        direction /= norm;
        let step = max_feasible_step(model.constraints(), interior, &direction);
        if !step.is_finite() || step <= 0.0 {
            continue;
        }
        let theta = interior + direction * (step * rng.next_f64() * 0.9);
        if model.constraints().is_strictly_feasible(&theta, 0.0) {
            return theta;
        }
    }
    interior.clone()
}

fn finish_run(model: &ParametricModel, run: SolveRun) -> Result<ProjectionResult> {
    debug_assert!(monotone_within_stages(&run.trace));
    let s = model.eval(&run.theta);
    let s_star = MeasureVector::from_dvector_clamped(s.clone(), 1e-9)?;
    let image_near_edge = s
        .iter()
        .any(|&v| v <= BOUNDARY_MARGIN || v >= 1.0 - BOUNDARY_MARGIN);
    let parameter_near_edge = model.constraints().min_slack(&run.theta) <= BOUNDARY_MARGIN;
    Ok(ProjectionResult {
        theta_star: run.theta,
        s_star,
        objective: run.objective,
        gradient_norm: run.gradient_norm,
        iterations: run.iterations,
        boundary_flag: image_near_edge || parameter_near_edge,
        converged: run.converged,
    })
}

fn monotone_within_stages(trace: &[(usize, f64, f64)]) -> bool {
    trace
        .iter()
        .all(|&(_, before, after)| after <= before + 1e-12 * (1.0 + before.abs()))
}

/// Result of the iterative proportional fitting procedure.
#[derive(Clone, Debug)]
pub struct IpfpResult {
    /// Scaled array with row margins `a` and column margins `b`.
    pub array: DMatrix<f64>,
    pub iterations: usize,
    /// Largest margin discrepancy at termination.
    pub max_margin_gap: f64,
    pub converged: bool,
}

/// Kullback-Leibler projection of a strictly positive array onto the
/// Frechet class with margins `(a, b)` by alternating row and column
/// scaling.
pub fn project_ipfp(
    q_array: &DMatrix<f64>,
    a: &crate::measures::ProbabilityVector,
    b: &crate::measures::ProbabilityVector,
    max_iterations: usize,
) -> Result<IpfpResult> {
    let (r, s) = q_array.shape();
    if r != a.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: r,
        });
    }
    if s != b.len() {
        return Err(Error::DimensionMismatch {
            expected: b.len(),
            actual: s,
        });
    }
    if let Some((i, _)) = q_array
        .iter()
        .enumerate()
        .find(|(_, &v)| v.is_nan() || v <= 0.0)
    {
        return Err(Error::BoundaryInput {
            what: "scaling array",
            index: i,
            value: q_array[i],
        });
    }
    if !a.is_interior() || !b.is_interior() {
        return Err(Error::InvalidArgument(
            "margins must be strictly positive".into(),
        ));
    }
    let mut x = q_array.clone();
    let mut gap = f64::INFINITY;
    let mut iterations = 0;
    while iterations < max_iterations {
        iterations += 1;
        for i in 0..r {
            let row_sum: f64 = x.row(i).iter().sum();
            let factor = a.get(i) / row_sum;
            for j in 0..s {
                x[(i, j)] *= factor;
            }
        }
        for j in 0..s {
            let col_sum: f64 = x.column(j).iter().sum();
            let factor = b.get(j) / col_sum;
            for i in 0..r {
                x[(i, j)] *= factor;
            }
        }
        gap = 0.0f64;
        for i in 0..r {
            let row_sum: f64 = x.row(i).iter().sum();
            gap = gap.max((row_sum - a.get(i)).abs());
        }
        for j in 0..s {
            let col_sum: f64 = x.column(j).iter().sum();
            gap = gap.max((col_sum - b.get(j)).abs());
        }
        if gap < IPFP_TOL {
            break;
        }
    }
    Ok(IpfpResult {
        array: x,
        iterations,
        max_margin_gap: gap,
        converged: gap < IPFP_TOL,
    })
}

/// Exhaustive evaluation of the objective on a feasible grid over the
/// parameter polytope; an independent brute-force check for the solvers.
/// Supports `k <= 3`.
pub fn grid_oracle(
    div: &Divergence,
    model: &ParametricModel,
    t: &MeasureVector,
    points_per_dim: usize,
) -> Result<DVector<f64>> {
    let k = model.k();
    if k > 3 {
        return Err(Error::GridDimension(k));
    }
    if points_per_dim < 10 {
        return Err(Error::InvalidArgument(
            "grid oracle needs at least 10 points per dimension".into(),
        ));
    }
    check_target_interior(model, t.entries())?;
    let (lo, hi) = bounding_box(model.constraints())?;
    let tv = t.entries();
    let mut best: Option<(f64, DVector<f64>)> = None;
    let mut index = vec![0usize; k];
    let denom = (points_per_dim - 1) as f64;
    'grid: loop {
        let theta = DVector::from_fn(k, |d, _| {
            lo[d] + (hi[d] - lo[d]) * (index[d] as f64) / denom
        });
        if model.constraints().min_slack(&theta) >= 0.0 {
            if let Some(value) = objective_value(div, model, tv, &theta) {
                let better = match &best {
                    None => true,
                    Some((bv, bt)) => {
                        value < *bv || (value == *bv && lexicographically_smaller(&theta, bt))
                    }
                };
                if better {
                    best = Some((value, theta));
                }
            }
        }
        // Advance the mixed-radix counter.
        for slot in index.iter_mut() {
            *slot += 1;
            if *slot < points_per_dim {
                continue 'grid;
            }
            *slot = 0;
        }
        break;
    }
    best.map(|(_, theta)| theta)
        .ok_or_else(|| Error::InfeasibleModel("no feasible grid point with finite objective".into()))
}

/// Axis-aligned bounding box of the polytope via vertex enumeration; the
/// feasible sets used here are bounded by construction.
pub(crate) fn bounding_box(
    constraints: &LinearInequalities,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let k = constraints.dim();
    let rows = constraints.len();
    if rows < k {
        return Err(Error::InfeasibleModel(
            "too few constraint rows for a bounded polytope".into(),
        ));
    }
    let mut lo = DVector::from_element(k, f64::INFINITY);
    let mut hi = DVector::from_element(k, f64::NEG_INFINITY);
    let mut found = false;
    let mut combo = (0..k).collect::<Vec<usize>>();
    loop {
        // Solve the k x k system of active rows.
        let a = DMatrix::from_fn(k, k, |i, j| constraints.coeffs()[(combo[i], j)]);
        let b = DVector::from_fn(k, |i, _| constraints.bounds()[combo[i]]);
        if let Some(vertex) = a.lu().solve(&b) {
            if vertex.iter().all(|v| v.is_finite())
                && constraints.min_slack(&vertex) >= -1e-9
            {
                found = true;
                for d in 0..k {
                    lo[d] = lo[d].min(vertex[d]);
                    hi[d] = hi[d].max(vertex[d]);
                }
            }
        }
        if !advance_combination(&mut combo, rows) {
            break;
        }
    }
    if !found {
        return Err(Error::InfeasibleModel(
            "vertex enumeration found no feasible vertex".into(),
        ));
    }
    Ok((lo, hi))
}

fn advance_combination(combo: &mut [usize], n: usize) -> bool {
    let k = combo.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if combo[i] < n - (k - i) {
            combo[i] += 1;
            for j in (i + 1)..k {
                combo[j] = combo[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Phase-one feasibility: finds a strictly feasible point of the polytope
/// by driving the worst constraint violation negative with a barrier Newton
/// method on the epigraph formulation.
pub(crate) fn find_interior_point(constraints: &LinearInequalities) -> Result<DVector<f64>> {
    let k = constraints.dim();
    let rows = constraints.len();
    let scale = 1.0 + constraints.bounds().amax();
    let z_cap = 10.0 * scale;

    // Variables (theta, z); constraints L theta - z <= u plus -z <= z_cap.
    let theta0 = DVector::zeros(k);
    let worst = -constraints.min_slack(&theta0);
    if worst < -1e-6 * scale {
        return Ok(theta0);
    }
    let mut y = DVector::zeros(k + 1);
    y[k] = worst + scale;

    let slack = |y: &DVector<f64>| -> DVector<f64> {
        let theta = y.rows(0, k).into_owned();
        let z = y[k];
        let base = constraints.slacks(&theta);
        let mut s = DVector::zeros(rows + 1);
        for j in 0..rows {
            s[j] = base[j] + z;
        }
        s[rows] = z_cap + z;
        s
    };

    let target_margin = 1e-6 * scale;
    let mut mu = 1.0 * scale;
    for _ in 0..60 {
        for _ in 0..80 {
            let s = slack(&y);
            if s.iter().any(|&v| v <= 0.0) {
                return Err(Error::InfeasibleModel(
                    "phase-one iterate left the feasible region".into(),
                ));
            }
            // Gradient and Hessian of z + mu * sum(-log s).
            let mut grad = DVector::zeros(k + 1);
            grad[k] = 1.0;
            let mut hess = DMatrix::zeros(k + 1, k + 1);
            for j in 0..=rows {
                let inv = 1.0 / s[j];
                let mut row = DVector::zeros(k + 1);
                if j < rows {
                    for p in 0..k {
                        row[p] = constraints.coeffs()[(j, p)];
                    }
                }
                row[k] = -1.0;
                grad.axpy(-mu * inv, &row, 1.0);
                let w = mu * inv * inv;
                for p in 0..=k {
                    for q in 0..=k {
                        hess[(p, q)] += w * row[p] * row[q];
                    }
                }
            }
            if grad.amax() <= (0.1 * mu).max(1e-10) {
                break;
            }
            let direction = Cholesky::new(hess)
                .map(|c| c.solve(&(-&grad)))
                .unwrap_or_else(|| -&grad);
            let slope = grad.dot(&direction);
            if !slope.is_finite() || slope >= 0.0 {
                break;
            }
            // Largest step keeping phase-one slacks positive.
            let mut alpha: f64 = 1.0;
            {
                let coeff_dir = {
                    let theta_dir = direction.rows(0, k).into_owned();
                    constraints.coeffs() * theta_dir
                };
                let s_now = slack(&y);
                for j in 0..rows {
                    let along = coeff_dir[j] - direction[k];
                    if along > 1e-300 {
                        alpha = alpha.min(0.99 * s_now[j] / along);
                    }
                }
                if -direction[k] > 1e-300 {
                    alpha = alpha.min(0.99 * s_now[rows] / -direction[k]);
                }
            }
            let merit = |y: &DVector<f64>| -> Option<f64> {
                let s = slack(y);
                if s.iter().any(|&v| v <= 0.0) {
                    return None;
                }
                Some(y[k] - mu * s.iter().map(|v| v.ln()).sum::<f64>())
            };
            let Some(current) = merit(&y) else { break };
            let mut accepted = false;
            for _ in 0..MAX_BACKTRACKS {
                if alpha <= 0.0 {
                    break;
                }
                let candidate = &y + &direction * alpha;
                if let Some(next) = merit(&candidate) {
                    if next <= current + ARMIJO_C * alpha * slope {
                        y = candidate;
                        accepted = true;
                        break;
                    }
                }
                alpha *= ARMIJO_SHRINK;
            }
            if !accepted {
                break;
            }
            if y[k] <= -target_margin {
                return Ok(y.rows(0, k).into_owned());
            }
        }
        if y[k] <= -target_margin {
            return Ok(y.rows(0, k).into_owned());
        }
        mu *= 0.2;
        if mu < 1e-12 * scale {
            break;
        }
    }
    if y[k] < 0.0 {
        Ok(y.rows(0, k).into_owned())
    } else {
        Err(Error::InfeasibleModel(format!(
            "phase one stalled with worst violation {:.3e}",
            y[k]
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::divergence::{builtin_suite, Divergence};
    use crate::measures::ProbabilityVector;
    use crate::models::{FrechetSpec, ParametricModel};

    fn moment_model() -> ParametricModel {
        ParametricModel::moments(&[0.0, 1.0, 2.0, 3.0, 4.0], &[1.0, 1.6, 3.52]).unwrap()
    }

    fn frechet_model() -> (FrechetSpec, ParametricModel) {
        let spec = FrechetSpec::new(
            ProbabilityVector::new(vec![0.2, 0.3, 0.5]).unwrap(),
            ProbabilityVector::new(vec![0.5, 0.25, 0.25]).unwrap(),
        )
        .unwrap();
        let model = ParametricModel::frechet(&spec).unwrap();
        (spec, model)
    }

    #[test]
    fn gradient_vanishes_at_self_projection_parameter() {
        let model = moment_model();
        let div = Divergence::kullback_leibler();
        let theta = model.interior_point().clone();
        let t = model.eval(&theta);
        let (value, grad) = objective_and_gradient(&div, &model, &t, &theta).unwrap();
        assert!(value.abs() < 1e-14);
        assert!(grad.amax() < 1e-12);
    }

    #[test]
    fn objective_gradient_matches_finite_differences() {
        let model = moment_model();
        let mut rng = SplitMix64::new(55);
        let h = 1e-7;
        for div in builtin_suite() {
            for _ in 0..25 {
                let raw: Vec<f64> = (0..5).map(|_| 0.05 + rng.next_f64()).collect();
                let sum: f64 = raw.iter().sum();
                let t = DVector::from_vec(raw.into_iter().map(|v| v / sum).collect());
                // Random strictly feasible parameter near the interior point.
                let mut theta = model.interior_point().clone();
                theta[0] += 0.2 * (rng.next_f64() - 0.5);
                theta[1] += 0.5 * (rng.next_f64() - 0.5);
                if !model.constraints().is_strictly_feasible(&theta, 1e-6) {
                    continue;
                }
                let (_, grad) = objective_and_gradient(&div, &model, &t, &theta).unwrap();
                for d in 0..2 {
                    let mut up = theta.clone();
                    let mut dn = theta.clone();
                    up[d] += h;
                    dn[d] -= h;
                    let (fu, _) = objective_and_gradient(&div, &model, &t, &up).unwrap();
                    let (fd, _) = objective_and_gradient(&div, &model, &t, &dn).unwrap();
                    let fd_grad = (fu - fd) / (2.0 * h);
                    assert!(
                        (grad[d] - fd_grad).abs() <= 1e-6 * (1.0 + grad[d].abs()),
                        "{}: {} vs {}",
                        div.name(),
                        grad[d],
                        fd_grad
                    );
                }
            }
        }
    }

    #[test]
    fn self_projection_recovers_target() {
        let model = moment_model();
        let div = Divergence::squared_hellinger();
        let theta = DVector::from_vec(vec![8.896, 24.8704]);
        let t = MeasureVector::from_dvector(model.eval(&theta)).unwrap();
        let opts = SolverOptions::default();
        let result = project(&div, &model, &t, &opts).unwrap();
        assert!(result.converged);
        assert!(result.objective.abs() < 1e-12);
        assert!((result.s_star.entries() - t.entries()).amax() < 1e-8);
        assert!((result.theta_star.clone() - theta).amax() < 1e-6);
        assert!(!result.boundary_flag);
    }

    #[test]
    fn binomial_objective_ordering_against_grid() {
        let div = Divergence::pearson_chi2();
        let model = ParametricModel::binomial(3).unwrap();
        let t = MeasureVector::new(vec![0.1, 0.2, 0.7]).unwrap();
        let theta_grid = grid_oracle(&div, &model, &t, 3000).unwrap();
        let at = |x: f64| {
            objective_value(&div, &model, t.entries(), &DVector::from_element(1, x)).unwrap()
        };
        assert!(at(0.7) > at(theta_grid[0]));
    }

    #[test]
    fn solver_matches_grid_oracle_on_binomial() {
        let div = Divergence::pearson_chi2();
        let model = ParametricModel::binomial(3).unwrap();
        let t = MeasureVector::new(vec![0.1, 0.2, 0.7]).unwrap();
        let opts = SolverOptions::default();
        let result = project(&div, &model, &t, &opts).unwrap();
        assert!(result.converged);
        let theta_grid = grid_oracle(&div, &model, &t, 100_000).unwrap();
        let spacing = 1.0 / 99_999.0;
        assert!((result.theta_star[0] - theta_grid[0]).abs() <= spacing);
        // Oracle dominance.
        let grid_value =
            objective_value(&div, &model, t.entries(), &theta_grid).unwrap();
        assert!(result.objective <= grid_value + 1e-12);
    }

    #[test]
    fn multistart_agrees_on_convex_instances() {
        let model = moment_model();
        let t = MeasureVector::new(vec![0.35, 0.3, 0.15, 0.1, 0.1]).unwrap();
        let opts = SolverOptions::default();
        for div in [
            Divergence::pearson_chi2(),
            Divergence::squared_hellinger(),
            Divergence::kullback_leibler(),
        ] {
            let runs = project_multistart(&div, &model, &t, &opts).unwrap();
            assert_eq!(runs.len(), opts.multistart_count);
            let best = select_best(runs.clone());
            for run in &runs {
                assert!(run.converged, "{}", div.name());
                assert!(
                    (&run.theta_star - &best.theta_star).amax() < 1e-8,
                    "{}: dispersion {:.3e}",
                    div.name(),
                    (&run.theta_star - &best.theta_star).amax()
                );
            }
        }
    }

    #[test]
    fn moment_instance_matches_certified_optima() {
        // Frozen reference minimizers, certified two independent ways: a
        // standalone coarse-to-fine mesh refinement over the moment
        // parametrization, and (for the quadratic divergence) the exact
        // weighted least-squares solution (9.1761344538, 26.8484033613).
        let model = moment_model();
        let t = MeasureVector::new(vec![0.35, 0.3, 0.15, 0.1, 0.1]).unwrap();
        let opts = SolverOptions::default();
        let cases = [
            (Divergence::pearson_chi2(), (9.176134, 26.848403)),
            (Divergence::squared_hellinger(), (9.011885, 25.844049)),
            (Divergence::kullback_leibler(), (9.074307, 26.199999)),
        ];
        for (div, (t1, t2)) in cases {
            let result = project(&div, &model, &t, &opts).unwrap();
            assert!(result.converged, "{}", div.name());
            assert!(!result.boundary_flag);
            assert!(
                (result.theta_star[0] - t1).abs() < 5e-6
                    && (result.theta_star[1] - t2).abs() < 5e-6,
                "{}: ({}, {})",
                div.name(),
                result.theta_star[0],
                result.theta_star[1]
            );
        }
    }

    #[test]
    fn ipfp_reaches_margins_and_fixed_point() {
        let (spec, model) = frechet_model();
        let q0 = DMatrix::from_row_slice(
            3,
            3,
            &[0.04, 0.11, 0.13, 0.10, 0.07, 0.08, 0.14, 0.12, 0.21],
        );
        let out = project_ipfp(&q0, spec.row_margins(), spec.col_margins(), 10_000).unwrap();
        assert!(out.converged);
        assert!(out.max_margin_gap < IPFP_TOL);
        for i in 0..3 {
            let row: f64 = out.array.row(i).iter().sum();
            assert!((row - spec.row_margins().get(i)).abs() < 1e-11);
        }

        // An array that already has the margins is a fixed point.
        let fixed = model.eval(model.interior_point());
        let fixed = DMatrix::from_fn(3, 3, |i, j| fixed[i + 3 * j]);
        let out2 = project_ipfp(&fixed, spec.row_margins(), spec.col_margins(), 100).unwrap();
        assert!((out2.array - fixed).amax() < 1e-12);

        // Strict positivity is required.
        let mut with_zero = q0.clone();
        with_zero[(0, 0)] = 0.0;
        assert!(project_ipfp(&with_zero, spec.row_margins(), spec.col_margins(), 100).is_err());
    }

    #[test]
    fn ipfp_agrees_with_general_kl_solver() {
        let (spec, model) = frechet_model();
        let q0 = DMatrix::from_row_slice(
            3,
            3,
            &[0.04, 0.11, 0.13, 0.10, 0.07, 0.08, 0.14, 0.12, 0.21],
        );
        let ipfp = project_ipfp(&q0, spec.row_margins(), spec.col_margins(), 10_000).unwrap();
        let div = Divergence::kullback_leibler();
        let t = MeasureVector::from_dvector(DVector::from_fn(9, |i, _| q0[(i % 3, i / 3)])).unwrap();
        let opts = SolverOptions::default();
        let solved = project(&div, &model, &t, &opts).unwrap();
        assert!(solved.converged);
        for j in 0..3 {
            for i in 0..3 {
                assert!(
                    (solved.s_star.get(i + 3 * j) - ipfp.array[(i, j)]).abs() < 1e-6,
                    "entry ({i},{j})"
                );
            }
        }
    }

    #[test]
    fn quartic_counterexample_minimizer() {
        let div = Divergence::custom(
            "quartic",
            |x| (x - 1.0).powi(4),
            |x| 4.0 * (x - 1.0).powi(3),
            |x| 12.0 * (x - 1.0) * (x - 1.0),
            1.0,
            crate::divergence::ExtendedReal::Infinite,
            -4.0,
        )
        .unwrap();
        let a = DMatrix::from_column_slice(3, 1, &[1.0, 1.0, -2.0]);
        let gamma = DVector::from_vec(vec![0.0, 0.0, 1.0]);
        let model = ParametricModel::affine(a, gamma, None, None).unwrap();
        let t = MeasureVector::new(vec![1.0 / 3.0; 3]).unwrap();
        let opts = SolverOptions::default();
        let result = project(&div, &model, &t, &opts).unwrap();
        assert!(
            (result.theta_star[0] - 1.0 / 3.0).abs() < 1e-6,
            "theta = {}",
            result.theta_star[0]
        );
        let theta_grid = grid_oracle(&div, &model, &t, 500_001).unwrap();
        assert!((theta_grid[0] - 1.0 / 3.0).abs() <= 0.5 / 500_000.0 + 1e-12);
    }

    #[test]
    fn boundary_minimum_is_flagged() {
        // Theta clipped to [0.1, 0.4] while the unconstrained Pearson
        // minimizer sits at 0.9: the solver must stop at the edge and flag.
        let a = DMatrix::from_column_slice(2, 1, &[1.0, -1.0]);
        let gamma = DVector::from_vec(vec![0.0, 1.0]);
        let extra = LinearInequalities::new(
            DMatrix::from_vec(2, 1, vec![1.0, -1.0]),
            DVector::from_vec(vec![0.4, -0.1]),
        )
        .unwrap();
        let model =
            ParametricModel::affine(a, gamma, Some(extra), Some(DVector::from_element(1, 0.25)))
                .unwrap();
        let div = Divergence::pearson_chi2();
        let t = MeasureVector::new(vec![0.9, 0.1]).unwrap();
        let opts = SolverOptions::default();
        let result = project(&div, &model, &t, &opts).unwrap();
        assert!(result.boundary_flag);
        assert!((result.theta_star[0] - 0.4).abs() < 1e-6);
        assert!(result.parameter_on_boundary(&model));
    }

    #[test]
    fn grid_oracle_self_projection_and_validation() {
        let div = Divergence::pearson_chi2();
        let model = ParametricModel::binomial(3).unwrap();
        let theta = DVector::from_element(1, 0.3);
        let t = MeasureVector::from_dvector(model.eval(&theta)).unwrap();
        let found = grid_oracle(&div, &model, &t, 1001).unwrap();
        assert!((found[0] - 0.3).abs() <= 1.0 / 1000.0 + 1e-12);
        assert!(matches!(
            grid_oracle(&div, &model, &t, 5),
            Err(Error::InvalidArgument(_))
        ));
        let (_, frechet) = frechet_model();
        let tf = MeasureVector::from_dvector(frechet.eval(frechet.interior_point())).unwrap();
        assert!(matches!(
            grid_oracle(&div, &frechet, &tf, 10),
            Err(Error::GridDimension(4))
        ));
    }

    #[test]
    fn solver_dominates_grid_oracle_on_moment_model() {
        let div = Divergence::squared_hellinger();
        let model = moment_model();
        let t = MeasureVector::new(vec![0.35, 0.3, 0.15, 0.1, 0.1]).unwrap();
        let opts = SolverOptions::default();
        let solved = project(&div, &model, &t, &opts).unwrap();
        let theta_grid = grid_oracle(&div, &model, &t, 200).unwrap();
        let grid_value = objective_value(&div, &model, t.entries(), &theta_grid).unwrap();
        assert!(solved.objective <= grid_value + 1e-12);
        // The coarse grid still lands near the converged optimum.
        assert!((theta_grid[0] - solved.theta_star[0]).abs() < 0.1);
        assert!((theta_grid[1] - solved.theta_star[1]).abs() < 0.3);
    }

    #[test]
    fn phase_one_finds_interior_points() {
        let model = moment_model();
        let point = find_interior_point(model.constraints()).unwrap();
        assert!(model.constraints().is_strictly_feasible(&point, 0.0));

        // An infeasible system is reported as such.
        let contradictory = LinearInequalities::new(
            DMatrix::from_vec(2, 1, vec![1.0, -1.0]),
            DVector::from_vec(vec![0.0, -0.5]),
        )
        .unwrap();
        assert!(find_interior_point(&contradictory).is_err());
    }

    #[test]
    fn descent_trace_is_monotone_within_stages() {
        let model = moment_model();
        let div = Divergence::kullback_leibler();
        let t = DVector::from_vec(vec![0.35, 0.3, 0.15, 0.1, 0.1]);
        let run = minimize_from(
            &div,
            &model,
            &t,
            model.interior_point().clone(),
            &SolverOptions::default(),
        )
        .unwrap();
        assert!(run.converged);
        assert!(!run.trace.is_empty());
        assert!(monotone_within_stages(&run.trace));
        let mut by_stage: std::collections::BTreeMap<usize, Vec<(f64, f64)>> = Default::default();
        for (stage, before, after) in run.trace {
            by_stage.entry(stage).or_default().push((before, after));
        }
        for (_, steps) in by_stage {
            for window in steps.windows(2) {
                // Accepted steps within a stage chain together.
                assert!(window[1].0 <= window[0].1 + 1e-9 * (1.0 + window[0].1.abs()));
            }
        }
    }

    #[test]
    fn rejects_bad_targets_and_options() {
        let model = moment_model();
        let div = Divergence::kullback_leibler();
        let bad_dim = MeasureVector::new(vec![0.5, 0.5]).unwrap();
        let opts = SolverOptions::default();
        assert!(matches!(
            project(&div, &model, &bad_dim, &opts),
            Err(Error::DimensionMismatch { .. })
        ));
        let edge = MeasureVector::new(vec![0.0, 0.3, 0.3, 0.2, 0.2]).unwrap();
        assert!(matches!(
            project(&div, &model, &edge, &opts),
            Err(Error::BoundaryInput { .. })
        ));
        let zero_opts = SolverOptions {
            multistart_count: 0,
            ..Default::default()
        };
        let t = MeasureVector::new(vec![0.35, 0.3, 0.15, 0.1, 0.1]).unwrap();
        assert!(project(&div, &model, &t, &zero_opts).is_err());
    }
}
