//! Config-driven command line front end for phi-projection computations.
//!
//! Subcommands: `project`, `asymptotics`, `montecarlo`, `check`, `sweep`.
//! Exit codes: 0 success, 2 validation error, 3 convergence failure,
//! 4 condition violation (the violated condition is named on stderr),
//! 1 input/output failure.

mod config;
mod output;

use clap::{Args, Parser, Subcommand};
use phiproj::diagnostics::{
    check_invertibility, check_strong_convexity, check_support, classify_support_guarantee,
    uniqueness_sweep, SupportGuarantee,
};
use phiproj::montecarlo::empirical_covariance;
use phiproj::{
    asymptotic_covariance, project, Error as LibError, ParametricModel, ProjectionResult,
};
use serde_json::json;
use std::path::PathBuf;
use std::process::ExitCode;

use output::{json_matrix, json_vector, OutputWriter};

/// Elementwise tolerance for the Monte Carlo comparison report.
const MC_TOLERANCE: f64 = 0.01;

/// Scales probed by the strong-convexity certificate.
const CONVEXITY_SCALES: [f64; 4] = [0.1, 0.5, 1.0, 2.0];

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Convergence(String),
    Condition { number: u8, message: String },
    Io(String),
}

impl CliError {
    fn from_validation(err: LibError) -> Self {
        if let Some(number) = err.violated_condition() {
            return CliError::Condition {
                number,
                message: err.to_string(),
            };
        }
        match err {
            LibError::NoConvergence { .. } => CliError::Convergence(err.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Convergence(_) => 3,
            CliError::Condition { .. } => 4,
            CliError::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "validation error: {m}"),
            CliError::Convergence(m) => write!(f, "convergence failure: {m}"),
            CliError::Condition { message, .. } => write!(f, "{message}"),
            CliError::Io(m) => write!(f, "io error: {m}"),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "phiproj",
    about = "Phi-projections of finite discrete measures: projections, projection-map \
             Jacobians, delta-method covariances, Monte Carlo verification and condition checks",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the solver and simulation seeds.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the simulation sample size.
    #[arg(long = "n")]
    n: Option<usize>,
    /// Overrides the simulation replicate count.
    #[arg(long = "N")]
    replicates: Option<usize>,
    /// Output directory for artifacts (default: config `output.path` or `.`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Artifact format: `csv` writes matrices as CSV next to the JSON report.
    #[arg(long)]
    format: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Projects the target onto the model set.
    Project(CommonArgs),
    /// Computes the projection-map Jacobians and the delta-method covariance.
    Asymptotics(CommonArgs),
    /// Compares the analytic covariance with a replicate study.
    Montecarlo(CommonArgs),
    /// Runs the condition diagnostics.
    Check(CommonArgs),
    /// Perturbation sweep with objective profiles.
    Sweep(CommonArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = read_thread_cap();
    if let Some(threads) = threads {
        // Cap worker parallelism up front; the Monte Carlo module honors the
        // same cap through its scoped pool configuration.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    let result = match &cli.command {
        Command::Project(args) => run_project(args),
        Command::Asymptotics(args) => run_asymptotics(args),
        Command::Montecarlo(args) => run_montecarlo(args, threads),
        Command::Check(args) => run_check(args),
        Command::Sweep(args) => run_sweep(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}

fn read_thread_cap() -> Option<usize> {
    std::env::var("PHIPROJ_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&v| v > 0)
}

struct Session {
    config: config::RunConfig,
    divergence: phiproj::Divergence,
    model: ParametricModel,
    writer: OutputWriter,
}

fn open_session(args: &CommonArgs) -> Result<Session, CliError> {
    let config = config::load(&args.config)?;
    let divergence = config::build_divergence(&config.divergence)?;
    let model = config::build_model(&config.model)?;
    let directory = args
        .out
        .clone()
        .or_else(|| config.output.path.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    let format = args
        .format
        .clone()
        .unwrap_or_else(|| config.output.format.clone());
    let writer = OutputWriter::new(&directory, &format, config.output.precision)?;
    Ok(Session {
        config,
        divergence,
        model,
        writer,
    })
}

fn projection_json(result: &ProjectionResult) -> serde_json::Value {
    json!({
        "theta_star": json_vector(&result.theta_star),
        "s_star": result.s_star.entries().iter().cloned().collect::<Vec<f64>>(),
        "objective": result.objective,
        "gradient_norm": result.gradient_norm,
        "iterations": result.iterations,
        "boundary_flag": result.boundary_flag,
        "converged": result.converged,
    })
}

fn run_project(args: &CommonArgs) -> Result<(), CliError> {
    let session = open_session(args)?;
    let target = config::build_target(&session.config, &session.model)?;
    let opts = config::build_solver_options(&session.config, args.seed);
    let result = project(&session.divergence, &session.model, &target, &opts)
        .map_err(CliError::from_validation)?;
    if !result.converged {
        return Err(CliError::Convergence(format!(
            "projection stopped after {} iterations with gradient norm {:.3e}",
            result.iterations, result.gradient_norm
        )));
    }
    session
        .writer
        .write_json("projection.json", &projection_json(&result))?;
    if session.writer.write_csv {
        let s = nalgebra::DMatrix::from_fn(result.s_star.len(), 1, |i, _| result.s_star.get(i));
        let theta =
            nalgebra::DMatrix::from_fn(result.theta_star.len(), 1, |i, _| result.theta_star[i]);
        session.writer.write_matrix_csv("projection_s_star.csv", &s)?;
        session
            .writer
            .write_matrix_csv("projection_theta_star.csv", &theta)?;
    }
    session.writer.print_vector("theta*", &result.theta_star);
    session.writer.print_vector("s*", result.s_star.entries());
    println!(
        "objective {:.6e}, gradient norm {:.3e}, iterations {}, boundary {}",
        result.objective, result.gradient_norm, result.iterations, result.boundary_flag
    );
    Ok(())
}

fn run_asymptotics(args: &CommonArgs) -> Result<(), CliError> {
    let session = open_session(args)?;
    let q0 = config::build_probability_target(&session.config, &session.model)?;
    let opts = config::build_solver_options(&session.config, args.seed);
    let result = asymptotic_covariance(&session.divergence, &session.model, &q0, &opts)
        .map_err(CliError::from_validation)?;
    let report = json!({
        "projection": projection_json(&result.projection),
        "hessian": json_matrix(&result.hessian),
        "delta": json_vector(&result.delta),
        "jac_theta": json_matrix(&result.jac_theta),
        "jac_projection": json_matrix(&result.jac_projection),
        "sigma_q0": json_matrix(&result.sigma_q0),
        "sigma": json_matrix(&result.sigma),
    });
    session.writer.write_json("asymptotics.json", &report)?;
    if session.writer.write_csv {
        session.writer.write_matrix_csv("sigma.csv", &result.sigma)?;
        session
            .writer
            .write_matrix_csv("sigma_q0.csv", &result.sigma_q0)?;
        session
            .writer
            .write_matrix_csv("jac_theta.csv", &result.jac_theta)?;
        session
            .writer
            .write_matrix_csv("jac_projection.csv", &result.jac_projection)?;
        session
            .writer
            .write_matrix_csv("hessian.csv", &result.hessian)?;
    }
    session.writer.print_vector("theta*", &result.theta_star);
    session.writer.print_matrix("sigma", &result.sigma);
    Ok(())
}

fn run_montecarlo(args: &CommonArgs, threads: Option<usize>) -> Result<(), CliError> {
    let session = open_session(args)?;
    let q0 = config::build_probability_target(&session.config, &session.model)?;
    let opts = config::build_solver_options(&session.config, args.seed);
    let sim =
        config::build_simulation(&session.config, args.seed, args.n, args.replicates, threads);
    let (report, _) = empirical_covariance(
        &session.divergence,
        &session.model,
        &q0,
        &sim,
        &opts,
        MC_TOLERANCE,
    )
    .map_err(CliError::from_validation)?;
    let artifact = json!({
        "n": sim.n,
        "replicates": sim.replicates,
        "seed": sim.seed,
        "sigma": json_matrix(&report.sigma),
        "sigma_empirical": json_matrix(&report.sigma_empirical),
        "elementwise_diffs": json_matrix(&report.elementwise_diffs),
        "max_abs_diff": report.max_abs_diff,
        "tolerance": report.tolerance,
        "pass": report.pass,
        "replicates_used": report.replicates_used,
        "replicates_skipped": report.replicates_skipped,
    });
    session.writer.write_json("montecarlo.json", &artifact)?;
    session.writer.write_matrix_csv("sigma.csv", &report.sigma)?;
    session
        .writer
        .write_matrix_csv("sigma_empirical.csv", &report.sigma_empirical)?;
    session.writer.print_matrix("sigma", &report.sigma);
    session
        .writer
        .print_matrix("sigma_empirical", &report.sigma_empirical);
    println!(
        "max |sigma - sigma_empirical| = {:.6} over {} replicates ({} skipped): {}",
        report.max_abs_diff,
        report.replicates_used + report.replicates_skipped,
        report.replicates_skipped,
        if report.pass {
            "within tolerance"
        } else {
            "outside tolerance"
        }
    );
    Ok(())
}

fn run_check(args: &CommonArgs) -> Result<(), CliError> {
    let session = open_session(args)?;
    let target = config::build_target(&session.config, &session.model)?;
    let opts = config::build_solver_options(&session.config, args.seed);

    let convexity = check_strong_convexity(&session.divergence, &CONVEXITY_SCALES, 10_000);
    let guarantee = classify_support_guarantee(&session.divergence, &session.model);

    let projection = project(&session.divergence, &session.model, &target, &opts)
        .map_err(CliError::from_validation)?;
    let parameter_interior = !projection.parameter_on_boundary(&session.model);
    let support = check_support(&projection);
    let invertibility = check_invertibility(&session.divergence, &session.model, &target, &opts)
        .map_err(CliError::from_validation)?;

    let report = json!({
        "strong_convexity": {
            "pass": convexity.pass,
            "entries": convexity.entries.iter().map(|e| json!({
                "w": e.w,
                "grid_min": e.grid_min,
                "kappa": e.kappa,
                "pass": e.pass,
            })).collect::<Vec<_>>(),
        },
        "support_guarantee": match guarantee {
            SupportGuarantee::Guaranteed => "guaranteed",
            SupportGuarantee::MustCheck => "must_check",
        },
        "projection": projection_json(&projection),
        "parameter_interior": parameter_interior,
        "support": {
            "pass": support.pass,
            "min_entry": support.min_entry,
            "max_entry": support.max_entry,
        },
        "invertibility": {
            "pass": invertibility.pass,
            "min_eigenvalue": invertibility.min_eigenvalue,
            "max_eigenvalue": invertibility.max_eigenvalue,
        },
    });
    session.writer.write_json("check.json", &report)?;

    println!(
        "strong convexity: {}",
        if convexity.pass { "pass" } else { "fail" }
    );
    println!(
        "support guarantee: {}",
        if guarantee == SupportGuarantee::Guaranteed {
            "guaranteed"
        } else {
            "must check"
        }
    );
    println!(
        "projection: converged {}, boundary {}",
        projection.converged, projection.boundary_flag
    );
    println!(
        "support: {} (min {:.3e}, max {:.6})",
        if support.pass { "pass" } else { "fail" },
        support.min_entry,
        support.max_entry
    );
    println!(
        "invertibility: {} (eigenvalues in [{:.3e}, {:.3e}])",
        if invertibility.pass { "pass" } else { "fail" },
        invertibility.min_eigenvalue,
        invertibility.max_eigenvalue
    );

    // Condition gates, in the order the asymptotics pipeline applies them.
    if !parameter_interior {
        return Err(CliError::from_validation(LibError::InteriorMinimizer {
            margin: phiproj::projection::BOUNDARY_MARGIN,
        }));
    }
    if !support.pass {
        let (index, value) = (0..projection.s_star.len())
            .map(|i| (i, projection.s_star.get(i)))
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap_or((0, 0.0));
        return Err(CliError::from_validation(LibError::SupportViolation {
            index,
            value,
        }));
    }
    if !invertibility.pass {
        return Err(CliError::from_validation(
            LibError::InvertibilityViolation {
                min_eigenvalue: invertibility.min_eigenvalue,
            },
        ));
    }
    Ok(())
}

fn run_sweep(args: &CommonArgs) -> Result<(), CliError> {
    let session = open_session(args)?;
    let target = config::build_target(&session.config, &session.model)?;
    let opts = config::build_solver_options(&session.config, args.seed);
    let seed = args.seed.or(session.config.solver.seed).unwrap_or(0);
    let report = uniqueness_sweep(
        &session.divergence,
        &session.model,
        &target,
        10,
        0.01,
        seed,
        &opts,
    )
    .map_err(CliError::from_validation)?;

    let artifact = json!({
        "unique": report.unique,
        "entries": report.entries.iter().map(|e| json!({
            "target": e.target.iter().cloned().collect::<Vec<f64>>(),
            "best": e.best.iter().cloned().collect::<Vec<f64>>(),
            "dispersion": e.dispersion,
            "all_converged": e.all_converged,
        })).collect::<Vec<_>>(),
        "profiles": report.profiles.iter().map(|p| p.label.clone()).collect::<Vec<_>>(),
    });
    session.writer.write_json("sweep.json", &artifact)?;
    for profile in &report.profiles {
        session.writer.write_profile_csv(
            &format!("sweep_profile_{}.csv", profile.label),
            session.model.k(),
            &profile.points,
        )?;
    }
    println!(
        "sweep: {} perturbations, unique-minimum verdict: {}",
        report.entries.len(),
        if report.unique { "unique" } else { "ambiguous" }
    );
    for (index, entry) in report.entries.iter().enumerate() {
        println!(
            "  perturbation {index:02}: dispersion {:.3e}, converged {}",
            entry.dispersion, entry.all_converged
        );
    }
    Ok(())
}
