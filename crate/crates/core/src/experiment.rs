//! Config-driven experiment pipeline: validate, build, run, measure, write.
//!
//! A config is a TOML file with top-level `horizon`, `seed`, `output_dir`
//! and the blocks `[scenario]`, `[graph]`, `[schedule]`, `[flags]`:
//!
//! ```toml
//! horizon = 200
//! seed = 7
//! output_dir = "out/synthetic"
//!
//! [scenario]
//! kind = "synthetic"      # or "dispatch", "pev"
//! nodes = 5
//! dims = [3]
//!
//! [graph]
//! preset = "switching3"   # or sequence = [[[0, 1]], [[1, 2]]]
//! b = 3
//!
//! [schedule]
//! kappa1 = 0.25
//! kappa2 = 0.25
//!
//! [flags]
//! compute_oracle = true
//! check_invariants = true
//! run_centralized_baseline = false
//! ```

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::engine::{run, run_centralized, validate_schedule, InitPolicy, RunFailure, RunMeta, RunMode, RunTrace, Schedule};
use crate::error::{Error, Result};
use crate::invariants::{check_invariants, InvariantReport, Tolerances};
use crate::metrics::{constraint_violation, dynamic_regret, MetricsReport};
use crate::network::{validate_sequence, GraphPreset, GraphSequence};
use crate::oracle::{solve_horizon, OracleOptions, StepOptimum};
use crate::problem::{NodeProblem, QuadraticScalarCost};
use crate::scenarios::dispatch::{default_coefficients, DispatchScenario};
use crate::scenarios::{
    build_dispatch, build_pev, build_synthetic, ingest_market_csv, synthetic_market, PevSpec, Scenario, SyntheticSpec,
};
use crate::vecops::{dist, norm};

pub const REGRET_FILE: &str = "regret.csv";
pub const VIOLATION_FILE: &str = "violation.csv";
pub const TRACE_FILE: &str = "trace.csv";
pub const INVARIANTS_FILE: &str = "invariants.json";
pub const SUMMARY_FILE: &str = "summary.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const BASELINE_REGRET_FILE: &str = "baseline_regret.csv";
pub const BASELINE_VIOLATION_FILE: &str = "baseline_violation.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    #[serde(default = "default_nodes")]
    pub nodes: usize,
    #[serde(default = "default_dims")]
    pub dims: Vec<usize>,
    #[serde(default)]
    pub increment: Option<f64>,
    #[serde(default)]
    pub radius: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DispatchConfig {
    /// Market CSV; relative paths resolve against the config file. Without
    /// it a synthetic feed of `horizon` rows is generated.
    #[serde(default)]
    pub csv: Option<PathBuf>,
    #[serde(default = "default_region")]
    pub region: String,
    #[serde(default = "default_interval")]
    pub interval_minutes: u32,
    /// Cost coefficients `a`, `b`, `c` per generator; all three or none.
    #[serde(default)]
    pub a: Option<Vec<f64>>,
    #[serde(default)]
    pub b: Option<Vec<f64>>,
    #[serde(default)]
    pub c: Option<Vec<f64>>,
    #[serde(default)]
    pub shares: Option<Vec<f64>>,
    /// `[lower, upper]` output range per generator.
    #[serde(default)]
    pub ranges: Option<Vec<(f64, f64)>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PevConfig {
    #[serde(default = "default_nodes")]
    pub nodes: usize,
    #[serde(default = "default_pev_dim")]
    pub dim: usize,
    #[serde(default = "default_pev_constraints")]
    pub constraints: usize,
    #[serde(default)]
    pub increment: Option<f64>,
    #[serde(default)]
    pub coupling: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ScenarioConfig {
    Synthetic(SyntheticConfig),
    Dispatch(DispatchConfig),
    Pev(PevConfig),
}

impl ScenarioConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            ScenarioConfig::Synthetic(_) => "synthetic",
            ScenarioConfig::Dispatch(_) => "dispatch",
            ScenarioConfig::Pev(_) => "pev",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphConfig {
    /// `complete`, `ring`, `star` or `switching3`; defaults to `switching3`.
    #[serde(default)]
    pub preset: Option<String>,
    /// Explicit undirected edge lists, one per graph, cycled in order.
    #[serde(default)]
    pub sequence: Option<Vec<Vec<(usize, usize)>>>,
    #[serde(default)]
    pub b: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub kappa1: f64,
    pub kappa2: f64,
    #[serde(default = "one")]
    pub step_scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Flags {
    #[serde(default = "yes")]
    pub compute_oracle: bool,
    #[serde(default = "yes")]
    pub check_invariants: bool,
    #[serde(default)]
    pub run_centralized_baseline: bool,
}

impl Default for Flags {
    fn default() -> Self {
        Self {
            compute_oracle: true,
            check_invariants: true,
            run_centralized_baseline: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// `(kappa1, kappa2)` grid points.
    #[serde(default)]
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub horizon: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub init: InitPolicy,
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub graph: GraphConfig,
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub flags: Flags,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub oracle: OracleOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    /// Directory that relative paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_nodes() -> usize {
    5
}
fn default_dims() -> Vec<usize> {
    vec![3]
}
fn default_region() -> String {
    "NSW".into()
}
fn default_interval() -> u32 {
    5
}
fn default_pev_dim() -> usize {
    2
}
fn default_pev_constraints() -> usize {
    3
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}
fn one() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}

/// Everything a run needs, built and validated.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub scenario: Scenario,
    pub graph: GraphSequence,
    pub graph_label: String,
    pub schedule: Schedule,
    pub warnings: Vec<String>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.base_dir = base_dir.into();
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml_str(&text, base).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Canonical JSON (sorted keys) of the effective configuration.
    pub fn canonical_json(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        serde_json::to_string(&value).expect("value serializes")
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }

    pub fn nodes(&self) -> usize {
        match &self.scenario {
            ScenarioConfig::Synthetic(s) => s.nodes,
            ScenarioConfig::Dispatch(d) => d.a.as_ref().map_or(default_coefficients().len(), Vec::len),
            ScenarioConfig::Pev(p) => p.nodes,
        }
    }

    pub fn schedule(&self) -> Result<Schedule> {
        validate_schedule(self.schedule.kappa1, self.schedule.kappa2)?.with_step_scale(self.schedule.step_scale)
    }

    pub fn graph(&self) -> Result<(GraphSequence, String)> {
        let n = self.nodes();
        let (seq, label) = match (&self.graph.preset, &self.graph.sequence) {
            (Some(_), Some(_)) => {
                return Err(Error::Config("graph: give either preset or sequence, not both".into()))
            }
            (_, Some(lists)) => {
                if lists.is_empty() {
                    return Err(Error::InvalidGraph("empty graph sequence".into()));
                }
                (GraphSequence::from_edge_lists(n, lists, 1)?, "custom".to_string())
            }
            (preset, None) => {
                let preset: GraphPreset = preset.as_deref().unwrap_or("switching3").parse()?;
                (preset.build(n)?, preset.name().to_string())
            }
        };
        let seq = match self.graph.b {
            Some(b) => seq.with_b(b)?,
            None => seq,
        };
        if let Some(why) = validate_sequence(&seq).failure_summary() {
            return Err(Error::InvalidGraph(why));
        }
        Ok((seq, label))
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }

    fn dispatch_coefficients(d: &DispatchConfig) -> Result<Vec<QuadraticScalarCost>> {
        match (&d.a, &d.b, &d.c) {
            (None, None, None) => Ok(default_coefficients()),
            (Some(a), Some(b), Some(c)) => {
                if a.len() != b.len() || a.len() != c.len() {
                    return Err(Error::Config(format!(
                        "dispatch coefficient lists differ in length: a={}, b={}, c={}",
                        a.len(),
                        b.len(),
                        c.len()
                    )));
                }
                a.iter()
                    .zip(b)
                    .zip(c)
                    .map(|((a, b), c)| QuadraticScalarCost::new(*a, *b, *c))
                    .collect()
            }
            _ => Err(Error::Config("dispatch: give all of a, b, c or none".into())),
        }
    }

    /// Static checks only: schedule, graph, scenario shapes and file presence.
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        self.schedule()?;
        self.graph()?;
        match &self.scenario {
            ScenarioConfig::Synthetic(s) => {
                if s.nodes == 0 {
                    return Err(Error::Config("synthetic: nodes must be at least 1".into()));
                }
                if s.dims.is_empty() || s.dims.contains(&0) || (s.dims.len() != 1 && s.dims.len() != s.nodes) {
                    return Err(Error::Config(format!(
                        "synthetic: dims must list one positive entry or one per node, got {:?}",
                        s.dims
                    )));
                }
            }
            ScenarioConfig::Dispatch(d) => {
                let coeffs = Self::dispatch_coefficients(d)?;
                if let Some(sh) = &d.shares {
                    if sh.len() != coeffs.len() {
                        return Err(Error::Config(format!("dispatch: {} shares for {} generators", sh.len(), coeffs.len())));
                    }
                }
                if let Some(csv) = &d.csv {
                    let path = self.resolve(csv);
                    if !path.is_file() {
                        return Err(Error::io(
                            &path,
                            std::io::Error::new(std::io::ErrorKind::NotFound, "market CSV not found"),
                        ));
                    }
                }
            }
            ScenarioConfig::Pev(p) => {
                if p.nodes == 0 || p.dim == 0 || p.constraints == 0 {
                    return Err(Error::Config("pev: nodes, dim and constraints must be at least 1".into()));
                }
            }
        }
        Ok(())
    }

    fn build_scenario(&self) -> Result<(Scenario, Vec<String>)> {
        let (t, seed) = (self.horizon, self.seed);
        match &self.scenario {
            ScenarioConfig::Synthetic(s) => {
                let mut spec = SyntheticSpec {
                    nodes: s.nodes,
                    dims: s.dims.clone(),
                    horizon: t,
                    seed,
                    ..SyntheticSpec::default()
                };
                if let Some(w) = s.increment {
                    spec.increment = w;
                }
                if let Some(r) = s.radius {
                    spec.radius = r;
                }
                Ok((
                    Scenario {
                        id: "synthetic".into(),
                        problems: build_synthetic(&spec)?,
                    },
                    Vec::new(),
                ))
            }
            ScenarioConfig::Dispatch(d) => {
                let series = match &d.csv {
                    Some(csv) => ingest_market_csv(self.resolve(csv), &d.region, d.interval_minutes)?,
                    None => synthetic_market(t, d.interval_minutes, seed, &d.region),
                };
                if series.len() < t {
                    return Err(Error::Config(format!(
                        "market series has {} rows but horizon is {t}",
                        series.len()
                    )));
                }
                let warnings = series.warnings.clone();
                let scenario: DispatchScenario = build_dispatch(
                    &series,
                    Self::dispatch_coefficients(d)?,
                    d.shares.clone(),
                    d.ranges.clone(),
                )?;
                Ok((scenario.scenario(t)?, warnings))
            }
            ScenarioConfig::Pev(p) => {
                let mut spec = PevSpec {
                    nodes: p.nodes,
                    dim: p.dim,
                    constraints: p.constraints,
                    horizon: t,
                    seed,
                    ..PevSpec::default()
                };
                if let Some(w) = p.increment {
                    spec.increment = w;
                }
                if let Some(c) = p.coupling {
                    spec.coupling = c;
                }
                Ok((
                    Scenario {
                        id: "pev".into(),
                        problems: build_pev(&spec)?,
                    },
                    Vec::new(),
                ))
            }
        }
    }

    /// Validates and builds the instance; reads the market CSV if any.
    pub fn prepare(&self) -> Result<Prepared> {
        self.validate()?;
        let schedule = self.schedule()?;
        let (graph, graph_label) = self.graph()?;
        let (scenario, warnings) = self.build_scenario()?;
        if scenario.nodes() != graph.nodes() {
            return Err(Error::Config(format!(
                "graph has {} nodes but the scenario has {}",
                graph.nodes(),
                scenario.nodes()
            )));
        }
        Ok(Prepared {
            scenario,
            graph,
            graph_label,
            schedule,
            warnings,
        })
    }
}

/// In-memory results of one experiment.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub trace: RunTrace,
    pub optima: Option<Vec<StepOptimum>>,
    pub metrics: MetricsReport,
    pub invariants: Option<InvariantReport>,
    pub baseline: Option<(RunTrace, MetricsReport)>,
    pub warnings: Vec<String>,
    pub problems: Vec<NodeProblem>,
}

impl Outcome {
    pub fn failure(&self) -> Option<&RunFailure> {
        self.trace.failure.as_ref()
    }

    /// All requested invariant checks passed and the run completed.
    pub fn passed(&self) -> bool {
        self.failure().is_none() && self.invariants.as_ref().is_none_or(|r| r.passed)
    }
}

/// Runs engine, oracle, metrics and invariant checks.
pub fn execute(cfg: &ExperimentConfig, prepared: &Prepared) -> Result<Outcome> {
    let problems = &prepared.scenario.problems;
    let meta = |mode| RunMeta {
        scenario: prepared.scenario.id.clone(),
        graph: prepared.graph_label.clone(),
        seed: cfg.seed,
        kappa1: cfg.schedule.kappa1,
        kappa2: cfg.schedule.kappa2,
        mode,
    };
    let trace = run(
        problems,
        &prepared.graph,
        &prepared.schedule,
        cfg.seed,
        cfg.init,
        cfg.horizon,
        meta(RunMode::Distributed),
    )?;
    let optima = if cfg.flags.compute_oracle {
        Some(solve_horizon(problems, trace.len().max(1).min(cfg.horizon), &cfg.oracle)?)
    } else {
        None
    };
    // A partial trace is scored against the optima it covers.
    let covered = optima.as_ref().map(|o| &o[..trace.len().min(o.len())]);
    let metrics = MetricsReport::compute(&trace, covered)?;
    let invariants = if cfg.flags.check_invariants {
        Some(check_invariants(
            &trace,
            problems,
            &prepared.graph,
            covered,
            metrics.regret_series.as_deref(),
            &cfg.tolerances,
        ))
    } else {
        None
    };
    let baseline = if cfg.flags.run_centralized_baseline {
        let bt = run_centralized(
            problems,
            &prepared.schedule,
            cfg.seed,
            cfg.init,
            cfg.horizon,
            meta(RunMode::Centralized),
        )?;
        let cov = optima.as_ref().map(|o| &o[..bt.len().min(o.len())]);
        let bm = MetricsReport::compute(&bt, cov)?;
        Some((bt, bm))
    } else {
        None
    };
    Ok(Outcome {
        trace,
        optima,
        metrics,
        invariants,
        baseline,
        warnings: prepared.warnings.clone(),
        problems: problems.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Passed,
    InvariantFailure,
    Diverged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_sha256: String,
    pub config: serde_json::Value,
    pub tool: String,
    pub version: String,
    pub started_at: String,
    pub wall_clock_seconds: f64,
    pub status: RunStatus,
    pub steps_completed: usize,
    pub warnings: Vec<String>,
    pub files: Vec<FileEntry>,
}

/// Files written for one run, plus its manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultsBundle {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub invariants: Option<InvariantReport>,
    pub failure: Option<RunFailure>,
    pub final_regret: Option<f64>,
    pub final_violation: Option<f64>,
}

impl ResultsBundle {
    pub fn passed(&self) -> bool {
        self.manifest.status == RunStatus::Passed
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }
}

fn series_csv(header: &str, values: &[f64]) -> String {
    let mut out = String::with_capacity(16 * (values.len() + 1));
    out.push_str(header);
    out.push('\n');
    for (k, v) in values.iter().enumerate() {
        out.push_str(&format!("{},{v:?}\n", k + 1));
    }
    out
}

fn trace_csv(trace: &RunTrace) -> String {
    let mut out = String::from("t,alpha,gamma,objective,aggregate_g_norm,tracking_residual,lambda_bar_norm,dual_spread\n");
    for rec in &trace.steps {
        let spread: f64 = rec.states.iter().map(|s| dist(&s.lambda, &rec.lambda_bar)).sum();
        out.push_str(&format!(
            "{},{:?},{:?},{:?},{:?},{:?},{:?},{:?}\n",
            rec.t,
            rec.alpha,
            rec.gamma,
            rec.objective_total(),
            norm(&rec.aggregate_g),
            dist(&rec.y_bar, &rec.aggregate_g),
            norm(&rec.lambda_bar),
            spread
        ));
    }
    out
}

#[derive(Serialize)]
struct Summary<'a> {
    scenario: &'a str,
    graph: &'a str,
    nodes: usize,
    horizon: usize,
    steps_completed: usize,
    failure: Option<&'a RunFailure>,
    final_regret: Option<f64>,
    final_violation: Option<f64>,
    path_length: Option<f64>,
    optima: Option<&'a crate::metrics::OptimaSummary>,
    baseline_final_regret: Option<f64>,
    baseline_final_violation: Option<f64>,
}

/// Writes the bundle for `outcome` into `dir` (created if missing).
pub fn write_bundle(
    cfg: &ExperimentConfig,
    outcome: &Outcome,
    dir: &Path,
    started_at: chrono::DateTime<chrono::Utc>,
    started: Instant,
) -> Result<ResultsBundle> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files: Vec<(String, Vec<u8>)> = Vec::new();
    if let Some(reg) = &outcome.metrics.regret_series {
        files.push((REGRET_FILE.into(), series_csv("t,regret_cum", reg).into_bytes()));
    }
    files.push((
        VIOLATION_FILE.into(),
        series_csv("t,violation", &outcome.metrics.violation_series).into_bytes(),
    ));
    files.push((TRACE_FILE.into(), trace_csv(&outcome.trace).into_bytes()));
    if let Some(inv) = &outcome.invariants {
        let json = serde_json::to_vec_pretty(inv).expect("report serializes");
        files.push((INVARIANTS_FILE.into(), json));
    }
    if let Some((bt, bm)) = &outcome.baseline {
        if let Some(reg) = &bm.regret_series {
            files.push((BASELINE_REGRET_FILE.into(), series_csv("t,regret_cum", reg).into_bytes()));
        }
        files.push((
            BASELINE_VIOLATION_FILE.into(),
            series_csv("t,violation", &constraint_violation(bt)).into_bytes(),
        ));
    }
    let summary = Summary {
        scenario: &outcome.trace.meta.scenario,
        graph: &outcome.trace.meta.graph,
        nodes: outcome.problems.len(),
        horizon: cfg.horizon,
        steps_completed: outcome.trace.len(),
        failure: outcome.failure(),
        final_regret: outcome.metrics.final_regret(),
        final_violation: outcome.metrics.final_violation(),
        path_length: outcome.metrics.path_length,
        optima: outcome.metrics.optima.as_ref(),
        baseline_final_regret: outcome.baseline.as_ref().and_then(|(_, m)| m.final_regret()),
        baseline_final_violation: outcome.baseline.as_ref().and_then(|(_, m)| m.final_violation()),
    };
    files.push((
        SUMMARY_FILE.into(),
        serde_json::to_vec_pretty(&summary).expect("summary serializes"),
    ));

    let mut entries = Vec::with_capacity(files.len());
    for (name, bytes) in &files {
        let path = dir.join(name);
        let mut f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        f.write_all(bytes).map_err(|e| Error::io(&path, e))?;
        entries.push(FileEntry {
            name: name.clone(),
            bytes: bytes.len() as u64,
            sha256: hex::encode(Sha256::digest(bytes)),
        });
    }

    let status = if outcome.failure().is_some() {
        RunStatus::Diverged
    } else if outcome.passed() {
        RunStatus::Passed
    } else {
        RunStatus::InvariantFailure
    };
    let manifest = Manifest {
        config_sha256: cfg.hash(),
        config: serde_json::to_value(cfg).expect("config serializes"),
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        started_at: started_at.to_rfc3339(),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        status,
        steps_completed: outcome.trace.len(),
        warnings: outcome.warnings.clone(),
        files: entries,
    };
    let path = dir.join(MANIFEST_FILE);
    let json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, json).map_err(|e| Error::io(&path, e))?;

    Ok(ResultsBundle {
        dir: dir.to_path_buf(),
        manifest,
        invariants: outcome.invariants.clone(),
        failure: outcome.failure().cloned(),
        final_regret: outcome.metrics.final_regret(),
        final_violation: outcome.metrics.final_violation(),
    })
}

/// Full pipeline for one config into `dir` (defaults to the config's
/// `output_dir`).
pub fn run_experiment(cfg: &ExperimentConfig, dir: Option<&Path>) -> Result<ResultsBundle> {
    let started_at = chrono::Utc::now();
    let started = Instant::now();
    let prepared = cfg.prepare()?;
    let outcome = execute(cfg, &prepared)?;
    let dir = dir.map(Path::to_path_buf).unwrap_or_else(|| cfg.output_dir());
    write_bundle(cfg, &outcome, &dir, started_at, started)
}

/// Subdirectory name of sweep point `k`.
pub fn sweep_dir_name(k: usize, (k1, k2): (f64, f64)) -> String {
    format!("point-{k:02}-k1-{k1}-k2-{k2}")
}

/// Runs every grid point concurrently, one bundle per point under `dir`.
/// Every point is validated before any run starts.
pub fn sweep(cfg: &ExperimentConfig, grid: &[(f64, f64)], dir: Option<&Path>) -> Result<Vec<ResultsBundle>> {
    let points: Vec<ExperimentConfig> = grid
        .iter()
        .map(|&(k1, k2)| {
            let mut c = cfg.clone();
            c.schedule.kappa1 = k1;
            c.schedule.kappa2 = k2;
            c.sweep = None;
            c
        })
        .collect();
    for c in &points {
        c.validate()?;
    }
    let root = dir.map(Path::to_path_buf).unwrap_or_else(|| cfg.output_dir());
    points
        .par_iter()
        .enumerate()
        .map(|(k, c)| run_experiment(c, Some(&root.join(sweep_dir_name(k, grid[k])))))
        .collect()
}

/// Regret and violation series of one run, without writing files.
pub fn series(cfg: &ExperimentConfig) -> Result<(Option<Vec<f64>>, Vec<f64>)> {
    let prepared = cfg.prepare()?;
    let outcome = execute(cfg, &prepared)?;
    let regret = match &outcome.optima {
        Some(o) => Some(dynamic_regret(&outcome.trace, &o[..outcome.trace.len()])?),
        None => None,
    };
    Ok((regret, outcome.metrics.violation_series))
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
horizon = 50
seed = 3

[scenario]
kind = "synthetic"

[schedule]
kappa1 = 0.25
kappa2 = 0.25
"#;

    #[test]
    fn defaults_fill_in() {
        let cfg = ExperimentConfig::from_toml_str(BASE, ".").unwrap();
        assert_eq!(cfg.nodes(), 5);
        assert!(cfg.flags.compute_oracle && cfg.flags.check_invariants && !cfg.flags.run_centralized_baseline);
        assert_eq!(cfg.schedule.step_scale, 1.0);
        cfg.validate().unwrap();
        let (g, label) = cfg.graph().unwrap();
        assert_eq!((g.b(), label.as_str()), (3, "switching3"));
    }

    #[test]
    fn bad_schedule_names_inequality() {
        let text = BASE.replace("kappa1 = 0.25", "kappa1 = 0.5");
        let cfg = ExperimentConfig::from_toml_str(&text, ".").unwrap();
        match cfg.validate() {
            Err(Error::InvalidSchedule { condition, .. }) => assert_eq!(condition, "kappa1 < 2*kappa2"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn switching_with_b1_rejected() {
        let text = format!("{BASE}\n[graph]\npreset = \"switching3\"\nb = 1\n");
        let cfg = ExperimentConfig::from_toml_str(&text, ".").unwrap();
        assert!(matches!(cfg.validate(), Err(Error::InvalidGraph(_))));
    }

    #[test]
    fn unknown_field_rejected() {
        let text = format!("{BASE}\nbogus = 1\n");
        assert!(matches!(ExperimentConfig::from_toml_str(&text, "."), Err(Error::Config(_))));
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::from_toml_str(BASE, ".").unwrap();
        let b = ExperimentConfig::from_toml_str(&format!("# comment\n{BASE}"), "/elsewhere").unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = ExperimentConfig::from_toml_str(&BASE.replace("seed = 3", "seed = 4"), ".").unwrap();
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn dispatch_missing_csv_is_io_error() {
        let text = BASE.replace("kind = \"synthetic\"", "kind = \"dispatch\"\ncsv = \"nope.csv\"");
        let cfg = ExperimentConfig::from_toml_str(&text, "/nonexistent").unwrap();
        assert!(matches!(cfg.validate(), Err(Error::Io { .. })));
    }

    #[test]
    fn bundle_written_and_listed() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig::from_toml_str(BASE, dir.path()).unwrap();
        let bundle = run_experiment(&cfg, Some(dir.path())).unwrap();
        for f in &bundle.manifest.files {
            let meta = fs::metadata(dir.path().join(&f.name)).unwrap();
            assert!(meta.len() > 0 && meta.len() == f.bytes, "{}", f.name);
        }
        let regret = fs::read_to_string(bundle.path(REGRET_FILE)).unwrap();
        assert_eq!(regret.lines().count(), 51);
        assert!(regret.starts_with("t,regret_cum\n1,"));
    }

    #[test]
    fn empty_sweep_runs_nothing() {
        let cfg = ExperimentConfig::from_toml_str(BASE, ".").unwrap();
        assert!(sweep(&cfg, &[], None).unwrap().is_empty());
        let err = sweep(&cfg, &[(0.25, 0.25), (0.2, 0.6)], Some(Path::new("/nonexistent/should-not-exist")));
        assert!(matches!(err, Err(Error::InvalidSchedule { .. })));
        assert!(!Path::new("/nonexistent/should-not-exist").exists());
    }
}
