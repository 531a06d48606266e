//! JSON run configuration: strict schema (unknown keys rejected) and
//! conversion into library types.

use nalgebra::{DMatrix, DVector};
use phiproj::{
    Divergence, FrechetSpec, MeasureVector, ParametricModel, ProbabilityVector, SimulationConfig,
    SolverOptions,
};
use serde::Deserialize;
use serde_json::Value;

use crate::CliError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub divergence: DivergenceConfig,
    /// Parsed manually so the discriminated variants stay strict.
    pub model: Value,
    pub target: Vec<f64>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub simulation: SimulationSection,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DivergenceConfig {
    pub name: String,
    #[serde(default)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub gradient_tol: Option<f64>,
    pub max_iterations: Option<usize>,
    pub barrier_initial: Option<f64>,
    pub barrier_shrink: Option<f64>,
    pub multistart_count: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    pub n: Option<usize>,
    pub replicates: Option<usize>,
    pub seed: Option<u64>,
    pub parallel_streams: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_format")]
    pub format: String,
    #[serde(default = "default_precision")]
    pub precision: usize,
    #[serde(default)]
    pub path: Option<String>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            format: default_format(),
            precision: default_precision(),
            path: None,
        }
    }
}

fn default_format() -> String {
    "csv".to_owned()
}

fn default_precision() -> usize {
    3
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BinomialModelConfig {
    m: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MomentModelConfig {
    x_points: Vec<f64>,
    mu: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrechetModelConfig {
    a: Vec<f64>,
    b: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinearEqualitiesModelConfig {
    b_matrix: Vec<Vec<f64>>,
    alpha: Vec<f64>,
    s0: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AffineModelConfig {
    a_matrix: Vec<Vec<f64>>,
    gamma: Vec<f64>,
    #[serde(default)]
    interior_point: Option<Vec<f64>>,
}

pub fn load(path: &std::path::Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    let config: RunConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("config parse error: {e}")))?;
    if config.version != 1 {
        return Err(CliError::Validation(format!(
            "unsupported config version {} (expected 1)",
            config.version
        )));
    }
    Ok(config)
}

pub fn build_divergence(cfg: &DivergenceConfig) -> Result<Divergence, CliError> {
    // `quartic` is accepted alongside the built-in bundles so the
    // degenerate-curvature instance can be expressed in a config file.
    if cfg.name == "quartic" {
        if cfg.alpha.is_some() {
            return Err(CliError::Validation(
                "divergence `quartic` takes no alpha parameter".into(),
            ));
        }
        return Ok(Divergence::custom(
            "quartic",
            |x| (x - 1.0).powi(4),
            |x| 4.0 * (x - 1.0).powi(3),
            |x| 12.0 * (x - 1.0) * (x - 1.0),
            1.0,
            phiproj::ExtendedReal::Infinite,
            -4.0,
        )
        .expect("quartic bundle is valid"));
    }
    phiproj::builtin_divergence(&cfg.name, cfg.alpha).map_err(CliError::from_validation)
}

fn matrix_from_rows(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>, CliError> {
    if rows.is_empty() || rows[0].is_empty() {
        return Err(CliError::Validation(format!("{what} must be nonempty")));
    }
    let cols = rows[0].len();
    if rows.iter().any(|r| r.len() != cols) {
        return Err(CliError::Validation(format!("{what} rows have unequal lengths")));
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

pub fn build_model(value: &Value) -> Result<ParametricModel, CliError> {
    let object = value
        .as_object()
        .ok_or_else(|| CliError::Validation("model must be a JSON object".into()))?;
    let kind = object
        .get("model")
        .and_then(Value::as_str)
        .ok_or_else(|| {
            CliError::Validation("model object needs a string `model` discriminator".into())
        })?
        .to_owned();
    let mut rest = object.clone();
    rest.remove("model");
    let rest = Value::Object(rest);
    let invalid = |e: serde_json::Error| CliError::Validation(format!("model config: {e}"));
    match kind.as_str() {
        "binomial" => {
            let cfg: BinomialModelConfig = serde_json::from_value(rest).map_err(invalid)?;
            ParametricModel::binomial(cfg.m).map_err(CliError::from_validation)
        }
        "moment" => {
            let cfg: MomentModelConfig = serde_json::from_value(rest).map_err(invalid)?;
            ParametricModel::moments(&cfg.x_points, &cfg.mu).map_err(CliError::from_validation)
        }
        "frechet" => {
            let cfg: FrechetModelConfig = serde_json::from_value(rest).map_err(invalid)?;
            let a = ProbabilityVector::new(cfg.a).map_err(CliError::from_validation)?;
            let b = ProbabilityVector::new(cfg.b).map_err(CliError::from_validation)?;
            let spec = FrechetSpec::new(a, b).map_err(CliError::from_validation)?;
            ParametricModel::frechet(&spec).map_err(CliError::from_validation)
        }
        "linear_equalities" => {
            let cfg: LinearEqualitiesModelConfig = serde_json::from_value(rest).map_err(invalid)?;
            let b = matrix_from_rows(&cfg.b_matrix, "b_matrix")?;
            let alpha = DVector::from_vec(cfg.alpha);
            let s0 = DVector::from_vec(cfg.s0);
            ParametricModel::from_linear_equalities(&b, &alpha, &s0)
                .map_err(CliError::from_validation)
        }
        "affine" => {
            let cfg: AffineModelConfig = serde_json::from_value(rest).map_err(invalid)?;
            let a = matrix_from_rows(&cfg.a_matrix, "a_matrix")?;
            let gamma = DVector::from_vec(cfg.gamma);
            let interior = cfg.interior_point.map(DVector::from_vec);
            ParametricModel::affine(a, gamma, None, interior).map_err(CliError::from_validation)
        }
        other => Err(CliError::Validation(format!(
            "unknown model `{other}` (expected binomial, moment, frechet, linear_equalities or affine)"
        ))),
    }
}

pub fn build_target(config: &RunConfig, model: &ParametricModel) -> Result<MeasureVector, CliError> {
    if config.target.len() != model.m() {
        return Err(CliError::Validation(format!(
            "target has {} entries but the model lives in dimension {}",
            config.target.len(),
            model.m()
        )));
    }
    if let Some((i, &v)) = config
        .target
        .iter()
        .enumerate()
        .find(|(_, &v)| !(v > 0.0 && v < 1.0))
    {
        return Err(CliError::Validation(format!(
            "target component {i} is {v}; the target must lie strictly inside (0, 1)"
        )));
    }
    MeasureVector::new(config.target.clone()).map_err(CliError::from_validation)
}

pub fn build_probability_target(
    config: &RunConfig,
    model: &ParametricModel,
) -> Result<ProbabilityVector, CliError> {
    let measure = build_target(config, model)?;
    ProbabilityVector::from_measure(measure).map_err(CliError::from_validation)
}

pub fn build_solver_options(config: &RunConfig, seed_override: Option<u64>) -> SolverOptions {
    let mut opts = SolverOptions::default();
    let s = &config.solver;
    if let Some(v) = s.gradient_tol {
        opts.gradient_tol = v;
    }
    if let Some(v) = s.max_iterations {
        opts.max_iterations = v;
    }
    if let Some(v) = s.barrier_initial {
        opts.barrier_initial = v;
    }
    if let Some(v) = s.barrier_shrink {
        opts.barrier_shrink = v;
    }
    if let Some(v) = s.multistart_count {
        opts.multistart_count = v;
    }
    if let Some(v) = s.seed {
        opts.seed = v;
    }
    if let Some(v) = seed_override {
        opts.seed = v;
    }
    opts
}

pub fn build_simulation(
    config: &RunConfig,
    seed_override: Option<u64>,
    n_override: Option<usize>,
    replicates_override: Option<usize>,
    threads: Option<usize>,
) -> SimulationConfig {
    let mut sim = SimulationConfig::default();
    let s = &config.simulation;
    if let Some(v) = s.n {
        sim.n = v;
    }
    if let Some(v) = s.replicates {
        sim.replicates = v;
    }
    if let Some(v) = s.seed {
        sim.seed = v;
    }
    if let Some(v) = s.parallel_streams {
        sim.parallel_streams = v;
    }
    if let Some(v) = seed_override {
        sim.seed = v;
    }
    if let Some(v) = n_override {
        sim.n = v;
    }
    if let Some(v) = replicates_override {
        sim.replicates = v;
    }
    if let Some(v) = threads {
        sim.parallel_streams = v;
    }
    sim
}
