//! Monte Carlo verification of the delta-method covariance.
//!
//! Draws `N` independent empirical frequency vectors of `n` categorical
//! samples from `q0`, projects each, and compares the sample covariance of
//! the `sqrt(n) * S*(q_n)` replicates against the analytic covariance.
//! Replicates are keyed to counter-based RNG streams, so the result is
//! bit-identical for a given configuration no matter how many worker
//! threads run the replicates.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::asymptotics::{asymptotic_covariance, AsymptoticResult};
use crate::divergence::Divergence;
use crate::error::{Error, Result};
use crate::measures::{MeasureVector, ProbabilityVector};
use crate::models::ParametricModel;
use crate::projection::{project_from, SolverOptions};
use crate::rng::SplitMix64;

#[derive(Clone, Debug)]
pub struct SimulationConfig {
    /// Sample size per replicate.
    pub n: usize,
    /// Number of replicates.
    pub replicates: usize,
    pub seed: u64,
    /// Worker thread cap; 0 uses the ambient rayon pool.
    pub parallel_streams: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            n: 5000,
            replicates: 5000,
            seed: 0x5EED,
            parallel_streams: 0,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.replicates == 0 {
            return Err(Error::InvalidArgument(
                "simulation requires n >= 1 and replicates >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Side-by-side comparison of the analytic and sampled covariances.
#[derive(Clone, Debug)]
pub struct ComparisonReport {
    pub sigma: DMatrix<f64>,
    pub sigma_empirical: DMatrix<f64>,
    /// `sigma - sigma_empirical`, entrywise.
    pub elementwise_diffs: DMatrix<f64>,
    pub max_abs_diff: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub replicates_used: usize,
    pub replicates_skipped: usize,
}

/// Empirical frequency vector of `n` categorical draws from `q0`.
/// Deterministic in the generator state; the output sums to one exactly in
/// counts.
pub fn sample_frequencies(
    q0: &ProbabilityVector,
    n: usize,
    rng: &mut SplitMix64,
) -> ProbabilityVector {
    let m = q0.len();
    let mut cumulative = Vec::with_capacity(m);
    let mut acc = 0.0;
    for i in 0..m {
        acc += q0.get(i);
        cumulative.push(acc);
    }
    cumulative[m - 1] = 1.0;
    let mut counts = vec![0u64; m];
    for _ in 0..n {
        counts[rng.next_categorical(&cumulative)] += 1;
    }
    let entries: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();
    ProbabilityVector::new(entries).expect("counts divided by n form a probability vector")
}

/// Runs the replicate study and compares against the analytic covariance at
/// `tolerance` (maximum absolute entrywise difference).
pub fn empirical_covariance(
    div: &Divergence,
    model: &ParametricModel,
    q0: &ProbabilityVector,
    sim: &SimulationConfig,
    solver: &SolverOptions,
    tolerance: f64,
) -> Result<(ComparisonReport, AsymptoticResult)> {
    sim.validate()?;
    let base = asymptotic_covariance(div, model, q0, solver)?;
    let warm_start = base.theta_star.clone();

    // Replicates are solved single-start from the base optimum: the base
    // run has already certified the instance, and q_n concentrates near q0.
    let mut replicate_opts = solver.clone();
    replicate_opts.multistart_count = 1;

    let worker = |r: usize| -> Result<Option<DVector<f64>>> {
        let mut rng = SplitMix64::stream(sim.seed, r as u64);
        let q_n = sample_frequencies(q0, sim.n, &mut rng);
        if !q_n.is_interior() {
            return Ok(None);
        }
        let run = project_from(div, model, q_n.as_measure(), &warm_start, &replicate_opts)?;
        if !run.converged {
            return Err(Error::NoConvergence {
                iterations: run.iterations,
                gradient_norm: run.gradient_norm,
            });
        }
        let scale = (sim.n as f64).sqrt();
        Ok(Some(run.s_star.entries() * scale))
    };

    let replicates: Vec<Option<DVector<f64>>> = if sim.parallel_streams == 1 {
        (0..sim.replicates).map(worker).collect::<Result<_>>()?
    } else if sim.parallel_streams == 0 {
        (0..sim.replicates)
            .into_par_iter()
            .map(worker)
            .collect::<Result<_>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(sim.parallel_streams)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
        pool.install(|| {
            (0..sim.replicates)
                .into_par_iter()
                .map(worker)
                .collect::<Result<_>>()
        })?
    };

    // Order-preserving sequential reduction keeps the result independent of
    // the thread schedule.
    let m = model.m();
    let used: Vec<&DVector<f64>> = replicates.iter().flatten().collect();
    let skipped = sim.replicates - used.len();
    if skipped * 100 > sim.replicates {
        return Err(Error::DataDegeneracy {
            skipped,
            total: sim.replicates,
        });
    }
    if used.len() < 2 {
        return Err(Error::InvalidArgument(
            "need at least two usable replicates for a sample covariance".into(),
        ));
    }
    let mut mean = DVector::zeros(m);
    for x in &used {
        mean += *x;
    }
    mean /= used.len() as f64;
    let mut sigma_empirical = DMatrix::zeros(m, m);
    for x in &used {
        let centered = *x - &mean;
        sigma_empirical += &centered * centered.transpose();
    }
    sigma_empirical /= (used.len() - 1) as f64;

    let elementwise_diffs = &base.sigma - &sigma_empirical;
    let max_abs_diff = elementwise_diffs.amax();
    let report = ComparisonReport {
        sigma: base.sigma.clone(),
        sigma_empirical,
        elementwise_diffs,
        max_abs_diff,
        tolerance,
        pass: max_abs_diff <= tolerance,
        replicates_used: used.len(),
        replicates_skipped: skipped,
    };
    Ok((report, base))
}

/// Convenience wrapper returning only the report.
pub fn empirical_covariance_report(
    div: &Divergence,
    model: &ParametricModel,
    q0: &ProbabilityVector,
    sim: &SimulationConfig,
    solver: &SolverOptions,
    tolerance: f64,
) -> Result<ComparisonReport> {
    empirical_covariance(div, model, q0, sim, solver, tolerance).map(|(report, _)| report)
}

/// The projection of one sampled frequency vector, exposed for callers that
/// stream replicates themselves.
pub fn replicate_projection(
    div: &Divergence,
    model: &ParametricModel,
    q_n: &MeasureVector,
    warm_start: &DVector<f64>,
    solver: &SolverOptions,
) -> Result<DVector<f64>> {
    let run = project_from(div, model, q_n, warm_start, solver)?;
    Ok(run.s_star.entries().clone())
}
