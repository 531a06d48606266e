//! Runnable checks for the differentiability conditions.
//!
//! Four gates decide whether the delta-method asymptotics apply at an
//! instance: strong convexity of the divergence generator, uniqueness of
//! interior minimizers in a neighborhood of the target (condition 9,
//! checked empirically by a perturbation sweep), positive definiteness of
//! the objective Hessian at the minimizer (condition 10), and full support
//! of the projection (condition 12). For affine models over probability
//! vectors with a generator whose slope diverges at zero, the support gate
//! is a theorem rather than a computation, and the classifier below says
//! so.

use nalgebra::DVector;
use rayon::prelude::*;

use crate::divergence::Divergence;
use crate::error::{Error, Result};
use crate::measures::MeasureVector;
use crate::models::ParametricModel;
use crate::projection::{
    bounding_box, project_multistart, ProjectionResult, SolverOptions, BOUNDARY_MARGIN,
};
use crate::rng::SplitMix64;

/// Grid floor used when scanning `phi''` near zero.
pub const CONVEXITY_GRID_FLOOR: f64 = 1e-8;

/// Default grid resolution for the strong-convexity certificate.
pub const CONVEXITY_GRID_SIZE: usize = 10_000;

/// Multistart dispersion under which a sweep entry counts as unique.
pub const SWEEP_DISPERSION_TOL: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct StrongConvexityEntry {
    pub w: f64,
    /// Minimum of `phi''` over the log-uniform grid on `(1e-8, 1/w)`.
    pub grid_min: f64,
    /// Claimed constant `kappa(w)`, when the divergence carries one.
    pub kappa: Option<f64>,
    pub pass: bool,
}

#[derive(Clone, Debug)]
pub struct StrongConvexityReport {
    pub entries: Vec<StrongConvexityEntry>,
    pub pass: bool,
}

/// Certifies `phi'' >= kappa(w)` on `(1e-8, 1/w)` over a log-uniform grid.
/// Divergences without a strong-convexity constant fail: nothing certifies
/// the condition for them.
pub fn check_strong_convexity(
    div: &Divergence,
    w_values: &[f64],
    grid_size: usize,
) -> StrongConvexityReport {
    let mut entries = Vec::with_capacity(w_values.len());
    for &w in w_values {
        let upper = 1.0 / w;
        let lo = CONVEXITY_GRID_FLOOR.ln();
        let hi = upper.ln();
        let denom = (grid_size - 1) as f64;
        let mut grid_min = f64::INFINITY;
        for i in 0..grid_size {
            let x = (lo + (hi - lo) * i as f64 / denom).exp();
            grid_min = grid_min.min(div.phi_second(x));
        }
        let kappa = div.kappa(w);
        let pass = matches!(kappa, Some(k) if grid_min >= k * (1.0 - 1e-9));
        entries.push(StrongConvexityEntry {
            w,
            grid_min,
            kappa,
            pass,
        });
    }
    StrongConvexityReport {
        pass: entries.iter().all(|e| e.pass),
        entries,
    }
}

#[derive(Clone, Debug)]
pub struct SweepEntry {
    pub target: DVector<f64>,
    /// Minimizer of each multistart run.
    pub minimizers: Vec<DVector<f64>>,
    pub best: DVector<f64>,
    /// Largest infinity-norm gap between a run and the best run.
    pub dispersion: f64,
    pub all_converged: bool,
}

/// Objective profile over a parameter grid, for plotting.
#[derive(Clone, Debug)]
pub struct Profile {
    /// "base" for the unperturbed target, otherwise the perturbation index.
    pub label: String,
    /// `(theta, objective)` rows on the feasible grid.
    pub points: Vec<(Vec<f64>, f64)>,
}

#[derive(Clone, Debug)]
pub struct SweepReport {
    pub entries: Vec<SweepEntry>,
    /// True when every perturbed target produced agreeing multistarts.
    pub unique: bool,
    /// Present for `k <= 2`.
    pub profiles: Vec<Profile>,
}

/// Empirical uniqueness check: perturbs the target with centered Gaussian
/// noise (resampling any draw that leaves `(0,1)^m`), projects each
/// perturbation from every start, and reports the dispersion of the
/// minimizers. For `k <= 2` the objective profiles on a feasible grid are
/// attached as plot data.
pub fn uniqueness_sweep(
    div: &Divergence,
    model: &ParametricModel,
    t0: &MeasureVector,
    num_perturbations: usize,
    noise_sd: f64,
    seed: u64,
    opts: &SolverOptions,
) -> Result<SweepReport> {
    if !t0.is_interior() {
        return Err(Error::BoundaryInput {
            what: "sweep target",
            index: 0,
            value: 0.0,
        });
    }
    let m = t0.len();
    let targets: Vec<DVector<f64>> = (0..num_perturbations)
        .map(|p| {
            let mut rng = SplitMix64::stream(seed, p as u64);
            loop {
                let candidate = DVector::from_fn(m, |i, _| {
                    t0.get(i) + noise_sd * rng.next_standard_normal()
                });
                if candidate.iter().all(|&v| v > 0.0 && v < 1.0) {
                    return candidate;
                }
            }
        })
        .collect();

    let entries: Vec<SweepEntry> = targets
        .par_iter()
        .map(|target| -> Result<SweepEntry> {
            let measure = MeasureVector::from_dvector(target.clone())?;
            let runs = project_multistart(div, model, &measure, opts)?;
            let best = runs
                .iter()
                .min_by(|a, b| a.objective.partial_cmp(&b.objective).unwrap())
                .expect("multistart returns at least one run")
                .theta_star
                .clone();
            let dispersion = runs
                .iter()
                .map(|r| (&r.theta_star - &best).amax())
                .fold(0.0f64, f64::max);
            Ok(SweepEntry {
                target: target.clone(),
                all_converged: runs.iter().all(|r| r.converged),
                minimizers: runs.into_iter().map(|r| r.theta_star).collect(),
                best,
                dispersion,
            })
        })
        .collect::<Result<_>>()?;

    let unique = entries
        .iter()
        .all(|e| e.all_converged && e.dispersion <= SWEEP_DISPERSION_TOL);

    let mut profiles = Vec::new();
    if model.k() <= 2 {
        profiles.push(objective_profile(div, model, t0.entries(), "base")?);
        for (p, target) in targets.iter().enumerate() {
            profiles.push(objective_profile(
                div,
                model,
                target,
                &format!("perturbation_{p:02}"),
            )?);
        }
    }

    Ok(SweepReport {
        entries,
        unique,
        profiles,
    })
}

fn objective_profile(
    div: &Divergence,
    model: &ParametricModel,
    target: &DVector<f64>,
    label: &str,
) -> Result<Profile> {
    let k = model.k();
    let per_dim = if k == 1 { 201 } else { 41 };
    let (lo, hi) = bounding_box(model.constraints())?;
    let mut points = Vec::new();
    let mut index = vec![0usize; k];
    let denom = (per_dim - 1) as f64;
    'grid: loop {
        let theta =
            DVector::from_fn(k, |d, _| lo[d] + (hi[d] - lo[d]) * index[d] as f64 / denom);
        if model.constraints().min_slack(&theta) >= 0.0 {
            let s = model.eval(&theta);
            if s.iter().all(|&v| (0.0..=1.0).contains(&v)) {
                let mut value = crate::divergence::ExtendedReal::Finite(0.0);
                for i in 0..model.m() {
                    value = value + div.f_eval(s[i].clamp(0.0, 1.0), target[i])?;
                }
                if let Some(v) = value.finite() {
                    points.push((theta.iter().cloned().collect(), v));
                }
            }
        }
        for slot in index.iter_mut() {
            *slot += 1;
            if *slot < per_dim {
                continue 'grid;
            }
            *slot = 0;
        }
        break;
    }
    Ok(Profile {
        label: label.to_owned(),
        points,
    })
}

#[derive(Clone, Debug)]
pub struct InvertibilityReport {
    pub pass: bool,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub theta_star: DVector<f64>,
}

/// Projects and eigen-decomposes the objective Hessian at the minimizer.
/// Passes when the smallest eigenvalue clears `1e-10` times the larger of
/// the top eigenvalue and the unit-curvature Hessian scale; the second
/// anchor keeps a Hessian that collapsed along with the generator curvature
/// from masquerading as well-conditioned.
pub fn check_invertibility(
    div: &Divergence,
    model: &ParametricModel,
    t0: &MeasureVector,
    opts: &SolverOptions,
) -> Result<InvertibilityReport> {
    let projection = crate::projection::project(div, model, t0, opts)?;
    if projection.parameter_on_boundary(model) {
        return Err(Error::InteriorMinimizer {
            margin: BOUNDARY_MARGIN,
        });
    }
    let hessian =
        crate::asymptotics::objective_hessian(div, model, t0.entries(), &projection.theta_star)?;
    let eigenvalues = hessian.symmetric_eigen().eigenvalues;
    let min_eigenvalue = eigenvalues.min();
    let max_eigenvalue = eigenvalues.max();
    let scale = max_eigenvalue.max(crate::asymptotics::hessian_scale_reference(
        model,
        t0.entries(),
        &projection.theta_star,
    ));
    Ok(InvertibilityReport {
        pass: max_eigenvalue > 0.0 && min_eigenvalue > 1e-10 * scale,
        min_eigenvalue,
        max_eigenvalue,
        theta_star: projection.theta_star,
    })
}

#[derive(Clone, Debug)]
pub struct SupportReport {
    pub pass: bool,
    pub min_entry: f64,
    pub max_entry: f64,
}

/// Full-support check on a projection result: every component strictly
/// inside `(1e-9, 1 - 1e-9)`.
pub fn check_support(result: &ProjectionResult) -> SupportReport {
    let entries = result.s_star.entries();
    let min_entry = entries.min();
    let max_entry = entries.max();
    SupportReport {
        pass: min_entry > 1e-9 && max_entry < 1.0 - 1e-9,
        min_entry,
        max_entry,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SupportGuarantee {
    /// The projection of any interior probability vector is interior: the
    /// model is affine over probability vectors with a linear-inequality
    /// parameter set and `phi'(0+) = -inf`.
    Guaranteed,
    /// No structural guarantee; run [`check_support`] on the instance.
    MustCheck,
}

/// Classifies whether the full-support condition holds structurally for
/// this divergence/model pair.
pub fn classify_support_guarantee(div: &Divergence, model: &ParametricModel) -> SupportGuarantee {
    let diverging_slope = div.phi_prime_limit_at_zero() == f64::NEG_INFINITY;
    let probability_model = match model.affine_data() {
        Some((a, gamma)) => {
            let ones = DVector::from_element(model.m(), 1.0);
            let col_sums = a.transpose() * &ones;
            let offset_sum: f64 = gamma.iter().sum();
            col_sums.amax() <= 1e-10 && (offset_sum - 1.0).abs() <= 1e-10
        }
        None => false,
    };
    if diverging_slope && probability_model {
        SupportGuarantee::Guaranteed
    } else {
        SupportGuarantee::MustCheck
    }
}
