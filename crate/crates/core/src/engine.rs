//! Distributed online primal–dual updates with constraint tracking, and the
//! centralized primal–dual baseline they approximate.
//!
//! One synchronous round at time `t`, for every node `i`:
//!
//! ```text
//!   μ_i  = Σ_j a_ij(t) λ_j
//!   z_i  = Σ_j a_ij(t) y_j
//!   x_i' = P_Ω_i[ x_i − α_t (∇f_i,t(x_i) + ∇g_i,t(x_i)ᵀ μ_i) ]
//!   λ_i' = [ μ_i + α_t (z_i − γ_t μ_i) ]₊
//!   y_i' = z_i + N (g_i,t+1(x_i') − g_i,t(x_i))
//! ```
//!
//! All consensus sums read the pre-round states. The `y` injection needs
//! `g_{i,t+1}`, so it is skipped at the last step of the horizon.
//!
//! The tracking state is carried in double-double precision (`y` plus
//! [`NodeState::y_low`]) and mixed in pairwise-flow form when the weights are
//! symmetric, so `mean_i y_i = Σ_i g_i,t(x_i)` holds to the rounding of the
//! final values instead of drifting with `t`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dd::{self, Dd};
use crate::error::{Error, Result};
use crate::network::{GraphSequence, WeightMatrix};
use crate::problem::{instance_shape, NodeProblem};
use crate::vecops::{all_finite, axpy, mean};

/// RNG stream reserved for initial-point draws.
pub const INIT_STREAM: u64 = 0xF00D;

/// Step size `α_t = s·t^{−κ₁}` and regularization `γ_t = t^{−κ₂}`.
///
/// The prefactor `s ∈ (0, 1]` defaults to 1. It leaves the exponent
/// conditions and `α_t γ_t ≤ 1` intact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    kappa1: f64,
    kappa2: f64,
    #[serde(default = "unit_scale")]
    step_scale: f64,
}

fn unit_scale() -> f64 {
    1.0
}

/// Accepts `(κ₁, κ₂)` iff `κ₂ ∈ (0, 1/2)` and `0 < κ₁ < min{2κ₂, 1 − 2κ₂}`.
pub fn validate_schedule(kappa1: f64, kappa2: f64) -> Result<Schedule> {
    let reject = |condition| Err(Error::InvalidSchedule {
        kappa1,
        kappa2,
        condition,
    });
    if !(kappa1.is_finite() && kappa2.is_finite()) {
        return reject("exponents must be finite");
    }
    if !(kappa2 > 0.0 && kappa2 < 0.5) {
        return reject("kappa2 in (0, 1/2)");
    }
    if kappa1 <= 0.0 {
        return reject("0 < kappa1");
    }
    if kappa1 >= 2.0 * kappa2 {
        return reject("kappa1 < 2*kappa2");
    }
    if kappa1 >= 1.0 - 2.0 * kappa2 {
        return reject("kappa1 < 1 - 2*kappa2");
    }
    Ok(Schedule {
        kappa1,
        kappa2,
        step_scale: 1.0,
    })
}

impl Schedule {
    pub fn kappa1(&self) -> f64 {
        self.kappa1
    }

    pub fn kappa2(&self) -> f64 {
        self.kappa2
    }

    pub fn step_scale(&self) -> f64 {
        self.step_scale
    }

    pub fn with_step_scale(self, step_scale: f64) -> Result<Self> {
        if !(step_scale > 0.0 && step_scale <= 1.0) {
            return Err(Error::OutOfRange {
                what: "step_scale",
                value: step_scale.to_string(),
                range: "(0, 1]".into(),
            });
        }
        Ok(Self { step_scale, ..self })
    }

    /// `(α_t, γ_t)` for `t ≥ 1`.
    pub fn step_size(&self, t: usize) -> Result<(f64, f64)> {
        if t == 0 {
            return Err(Error::OutOfRange {
                what: "time index",
                value: "0".into(),
                range: "t ≥ 1".into(),
            });
        }
        let tf = t as f64;
        Ok((self.step_scale * tf.powf(-self.kappa1), tf.powf(-self.kappa2)))
    }
}

pub fn step_size(schedule: &Schedule, t: usize) -> Result<(f64, f64)> {
    schedule.step_size(t)
}

/// One node's algorithm state at a time step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeState {
    pub x: Vec<f64>,
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    /// Low-order part of the tracking state; the carried value is `y + y_low`.
    /// Empty means zero.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub y_low: Vec<f64>,
}

impl NodeState {
    fn tracking(&self) -> Vec<Dd> {
        self.y
            .iter()
            .enumerate()
            .map(|(k, &hi)| Dd::new(hi, self.y_low.get(k).copied().unwrap_or(0.0)))
            .collect()
    }
}

fn split(v: &[Dd]) -> (Vec<f64>, Vec<f64>) {
    v.iter().map(|d| (d.hi, d.lo)).unzip()
}

/// `z_i = Σ_j a_ij y_j` in double-double. Symmetric weights use
/// `z_i = y_i + Σ_{j≠i} a_ij (y_j − y_i)`, whose flows cancel exactly in the
/// network sum.
fn mix_tracking(weights: &WeightMatrix, ys: &[Vec<Dd>]) -> Vec<Vec<Dd>> {
    let n = weights.size();
    let symmetric = weights.is_symmetric();
    (0..n)
        .map(|i| {
            let len = ys[i].len();
            (0..len)
                .map(|k| {
                    if symmetric {
                        let mut acc = ys[i][k];
                        for (j, yj) in ys.iter().enumerate() {
                            let w = weights.get(i, j);
                            if j != i && w != 0.0 {
                                acc = acc.add(yj[k].sub(ys[i][k]).scale(w));
                            }
                        }
                        acc
                    } else {
                        ys.iter()
                            .enumerate()
                            .filter(|(j, _)| weights.get(i, *j) != 0.0)
                            .fold(Dd::default(), |acc, (j, yj)| acc.add(yj[k].scale(weights.get(i, j))))
                    }
                })
                .collect()
        })
        .collect()
}

/// Choice of `x_{i,1} ∈ Ω_i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitPolicy {
    /// `x_{i,1} = P_Ω_i(0)`.
    #[default]
    ProjectZero,
    /// Uniform draw in the bounding box of `Ω_i`, then projected.
    Uniform,
}

/// Initial states: `λ_{i,1} = 0`, `y_{i,1} = N g_{i,1}(x_{i,1})`; `μ` and `z`
/// are zero until the first round fills them.
pub fn init_run(problems: &[NodeProblem], seed: u64, policy: InitPolicy) -> Result<Vec<NodeState>> {
    let (n, _) = instance_shape(problems)?;
    let nodes = problems.len() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(INIT_STREAM);
    problems
        .iter()
        .map(|p| {
            let set = p.feasible_set();
            let x = match policy {
                InitPolicy::ProjectZero => set.project(&vec![0.0; p.dim()])?,
                InitPolicy::Uniform => {
                    let (lo, hi) = set.bounding_box();
                    let draw: Vec<f64> = lo
                        .iter()
                        .zip(&hi)
                        .map(|(l, h)| if h > l { rng.gen_range(*l..=*h) } else { *l })
                        .collect();
                    set.project(&draw)?
                }
            };
            let y: Vec<Dd> = p
                .constraint(1, &x)?
                .into_iter()
                .map(|g| Dd::from_f64(g).scale(nodes))
                .collect();
            let (y, y_low) = split(&y);
            Ok(NodeState {
                x,
                lambda: vec![0.0; n],
                mu: vec![0.0; n],
                y,
                z: vec![0.0; n],
                y_low,
            })
        })
        .collect()
}

/// Result of one synchronous round.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    /// States at `t` with `μ_t`, `z_t` filled in.
    pub current: Vec<NodeState>,
    /// `x_{t+1}`, `λ_{t+1}`, `y_{t+1}`. At the last step `y` carries `z_t`
    /// unchanged. `μ`, `z` are left from `t`.
    pub next: Vec<NodeState>,
}

fn diverged(t: usize, what: &'static str) -> Error {
    Error::Diverged { t, what }
}

/// Primal step `P_Ω[x − α(∇f + ∇gᵀ multiplier)]`.
fn primal_update(problem: &NodeProblem, t: usize, x: &[f64], multiplier: &[f64], alpha: f64) -> Result<Vec<f64>> {
    let e = problem.eval(t, x)?;
    let mut dir = e.grad_f;
    for (row, &m) in e.jac_g.iter().zip(multiplier) {
        axpy(m, row, &mut dir);
    }
    let trial: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi - alpha * di).collect();
    if !all_finite(&trial) {
        return Err(diverged(t, "primal iterate"));
    }
    problem.feasible_set().project(&trial)
}

pub fn distributed_step(
    states: &[NodeState],
    problems: &[NodeProblem],
    weights: &WeightMatrix,
    t: usize,
    schedule: &Schedule,
) -> Result<StepOutput> {
    let (_, horizon) = instance_shape(problems)?;
    if states.len() != problems.len() || weights.size() != problems.len() {
        return Err(Error::Contract(format!(
            "{} states, {} problems and a {}-node weight matrix",
            states.len(),
            problems.len(),
            weights.size()
        )));
    }
    if t == 0 || t > horizon {
        return Err(Error::OutOfRange {
            what: "time index",
            value: t.to_string(),
            range: format!("1..={horizon}"),
        });
    }
    let (alpha, gamma) = schedule.step_size(t)?;
    let nodes = problems.len() as f64;

    let lambdas: Vec<Vec<f64>> = states.iter().map(|s| s.lambda.clone()).collect();
    let ys: Vec<Vec<Dd>> = states.iter().map(NodeState::tracking).collect();
    let mus = weights.mix(&lambdas);
    let zs = mix_tracking(weights, &ys);

    let mut current = Vec::with_capacity(states.len());
    let mut next = Vec::with_capacity(states.len());
    for (((state, problem), mu), zd) in states.iter().zip(problems).zip(mus).zip(zs) {
        let z: Vec<f64> = zd.iter().map(|d| d.hi).collect();
        let x_next = primal_update(problem, t, &state.x, &mu, alpha)?;
        let lambda_next: Vec<f64> = mu
            .iter()
            .zip(&z)
            .map(|(m, zi)| (m + alpha * (zi - gamma * m)).max(0.0))
            .collect();
        let y_next: Vec<Dd> = if t < horizon {
            let g_new = problem.constraint(t + 1, &x_next)?;
            let g_old = problem.constraint(t, &state.x)?;
            zd.iter()
                .zip(g_new.iter().zip(&g_old))
                .map(|(zi, (gn, go))| zi.add(Dd::diff(*gn, *go).scale(nodes)))
                .collect()
        } else {
            zd
        };
        let (y_next, y_low) = split(&y_next);
        if !all_finite(&lambda_next) || !all_finite(&y_next) || !all_finite(&y_low) {
            return Err(diverged(t, "dual or tracking state"));
        }
        next.push(NodeState {
            x: x_next,
            lambda: lambda_next,
            mu: mu.clone(),
            y: y_next,
            z: z.clone(),
            y_low,
        });
        current.push(NodeState {
            x: state.x.clone(),
            lambda: state.lambda.clone(),
            mu,
            y: state.y.clone(),
            z,
            y_low: state.y_low.clone(),
        });
    }
    Ok(StepOutput { current, next })
}

/// One centralized primal–dual step with a single multiplier `λ_t`.
pub fn centralized_step(
    x: &[Vec<f64>],
    lambda: &[f64],
    t: usize,
    schedule: &Schedule,
    problems: &[NodeProblem],
) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let (n, _) = instance_shape(problems)?;
    if x.len() != problems.len() || lambda.len() != n {
        return Err(Error::Contract("centralized step shape mismatch".into()));
    }
    if lambda.iter().any(|v| *v < 0.0) {
        return Err(Error::Contract("centralized multiplier must be nonnegative".into()));
    }
    let (alpha, gamma) = schedule.step_size(t)?;
    let mut constraints = Vec::with_capacity(x.len());
    let mut x_next = Vec::with_capacity(x.len());
    for (xi, p) in x.iter().zip(problems) {
        constraints.push(p.constraint(t, xi)?);
        x_next.push(primal_update(p, t, xi, lambda, alpha)?);
    }
    let aggregate = aggregate(&constraints, n);
    let lambda_next: Vec<f64> = lambda
        .iter()
        .zip(&aggregate)
        .map(|(l, g)| (l + alpha * (g - gamma * l)).max(0.0))
        .collect();
    if !all_finite(&lambda_next) {
        return Err(diverged(t, "multiplier"));
    }
    Ok((x_next, lambda_next))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunMode {
    Distributed,
    Centralized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub scenario: String,
    pub graph: String,
    pub seed: u64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub mode: RunMode,
}

/// Everything observed at one time step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub alpha: f64,
    pub gamma: f64,
    /// States at `t`. In centralized mode `λ = μ` is the global multiplier
    /// and `y = z` is the exact aggregate constraint.
    pub states: Vec<NodeState>,
    pub lambda_bar: Vec<f64>,
    pub y_bar: Vec<f64>,
    /// `Σ_i g_{i,t}(x_{i,t})`
    pub aggregate_g: Vec<f64>,
    /// `f_{i,t}(x_{i,t})` per node.
    pub objectives: Vec<f64>,
    /// `g_{i,t}(x_{i,t})` per node.
    pub constraints: Vec<Vec<f64>>,
}

impl StepRecord {
    pub fn objective_total(&self) -> f64 {
        self.objectives.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub t: usize,
    pub message: String,
}

/// Append-only per-step record of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub meta: RunMeta,
    pub steps: Vec<StepRecord>,
    /// Set when the run stopped early on a non-finite state.
    pub failure: Option<RunFailure>,
}

impl RunTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn is_complete(&self) -> bool {
        self.failure.is_none()
    }

    fn push(&mut self, rec: StepRecord) {
        debug_assert_eq!(rec.t, self.steps.len() + 1);
        self.steps.push(rec);
    }
}

/// `Σ_i g_i` per component, rounded once.
fn aggregate(constraints: &[Vec<f64>], n: usize) -> Vec<f64> {
    (0..n).map(|k| dd::sum(constraints.iter().map(|g| g[k]))).collect()
}

fn record(
    problems: &[NodeProblem],
    t: usize,
    schedule: &Schedule,
    states: Vec<NodeState>,
    n: usize,
) -> Result<StepRecord> {
    let (alpha, gamma) = schedule.step_size(t)?;
    let mut objectives = Vec::with_capacity(states.len());
    let mut constraints = Vec::with_capacity(states.len());
    for (s, p) in states.iter().zip(problems) {
        objectives.push(p.objective(t, &s.x)?);
        constraints.push(p.constraint(t, &s.x)?);
    }
    let aggregate_g = aggregate(&constraints, n);
    let lambda_bar = mean(states.iter().map(|s| s.lambda.as_slice()), n);
    let inv = 1.0 / states.len() as f64;
    let y_bar = (0..n)
        .map(|k| {
            let total = states
                .iter()
                .map(|s| s.tracking()[k])
                .fold(Dd::default(), Dd::add);
            total.scale(inv).to_f64()
        })
        .collect();
    Ok(StepRecord {
        t,
        alpha,
        gamma,
        states,
        lambda_bar,
        y_bar,
        aggregate_g,
        objectives,
        constraints,
    })
}

/// Runs the distributed algorithm for `horizon` steps.
///
/// Deterministic in `(problems, graph, schedule, seed, policy, horizon)`. A
/// non-finite state stops the run and returns the partial trace with
/// [`RunTrace::failure`] set; contract errors are returned as `Err`.
pub fn run(
    problems: &[NodeProblem],
    graph: &GraphSequence,
    schedule: &Schedule,
    seed: u64,
    policy: InitPolicy,
    horizon: usize,
    meta: RunMeta,
) -> Result<RunTrace> {
    let (n, available) = instance_shape(problems)?;
    check_horizon(horizon, available)?;
    if graph.nodes() != problems.len() {
        return Err(Error::Contract(format!(
            "graph has {} nodes but the scenario has {}",
            graph.nodes(),
            problems.len()
        )));
    }
    let problems = truncate(problems, horizon)?;
    let mut trace = RunTrace {
        meta,
        steps: Vec::with_capacity(horizon),
        failure: None,
    };
    let mut states = init_run(&problems, seed, policy)?;
    for t in 1..=horizon {
        match distributed_step(&states, &problems, graph.at(t), t, schedule) {
            Ok(out) => {
                trace.push(record(&problems, t, schedule, out.current, n)?);
                states = out.next;
            }
            Err(e @ Error::Diverged { .. }) => {
                trace.failure = Some(RunFailure {
                    t,
                    message: e.to_string(),
                });
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(trace)
}

/// Runs the centralized baseline over the same horizon and initial points.
pub fn run_centralized(
    problems: &[NodeProblem],
    schedule: &Schedule,
    seed: u64,
    policy: InitPolicy,
    horizon: usize,
    meta: RunMeta,
) -> Result<RunTrace> {
    let (n, available) = instance_shape(problems)?;
    check_horizon(horizon, available)?;
    let problems = truncate(problems, horizon)?;
    let mut trace = RunTrace {
        meta,
        steps: Vec::with_capacity(horizon),
        failure: None,
    };
    let init = init_run(&problems, seed, policy)?;
    let mut x: Vec<Vec<f64>> = init.into_iter().map(|s| s.x).collect();
    let mut lambda = vec![0.0; n];
    for t in 1..=horizon {
        let constraints = x
            .iter()
            .zip(problems.iter())
            .map(|(xi, p)| p.constraint(t, xi))
            .collect::<Result<Vec<_>>>()?;
        let aggregate = aggregate(&constraints, n);
        let states = x
            .iter()
            .map(|xi| NodeState {
                x: xi.clone(),
                lambda: lambda.clone(),
                mu: lambda.clone(),
                y: aggregate.clone(),
                z: aggregate.clone(),
                y_low: Vec::new(),
            })
            .collect();
        match centralized_step(&x, &lambda, t, schedule, &problems) {
            Ok((xn, ln)) => {
                trace.push(record(&problems, t, schedule, states, n)?);
                x = xn;
                lambda = ln;
            }
            Err(e @ Error::Diverged { .. }) => {
                trace.failure = Some(RunFailure {
                    t,
                    message: e.to_string(),
                });
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(trace)
}

fn check_horizon(horizon: usize, available: usize) -> Result<()> {
    if horizon == 0 || horizon > available {
        return Err(Error::OutOfRange {
            what: "horizon",
            value: horizon.to_string(),
            range: format!("1..={available}"),
        });
    }
    Ok(())
}

/// Restricts every node's stream to the first `horizon` steps so the last
/// step of the run is the last step of the data.
fn truncate(problems: &[NodeProblem], horizon: usize) -> Result<Vec<NodeProblem>> {
    problems
        .iter()
        .map(|p| {
            let steps = (1..=horizon)
                .map(|t| p.step(t).cloned())
                .collect::<Result<Vec<_>>>()?;
            NodeProblem::new(p.id(), p.feasible_set().clone(), steps)
        })
        .collect()
}
