//! Runtime checks of the structural guarantees of a distributed run.
//!
//! Constants that the analysis leaves abstract (`C`, `C₂`, `η`) are taken
//! from the run itself, so every check here is a statement about observed
//! quantities.

use serde::{Deserialize, Serialize};

use crate::engine::{RunMode, RunTrace};
use crate::network::{mixing_bound, mixing_bound_ratio, GraphSequence};
use crate::oracle::StepOptimum;
use crate::problem::NodeProblem;
use crate::vecops::{dist, norm};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Absolute bound on `‖ȳ_t − Σ_i g_{i,t}(x_{i,t})‖`.
    pub tracking_identity: f64,
    /// Relative bound on `‖mean μ_t − mean λ_t‖`.
    pub dual_mean: f64,
    /// Relative arithmetic slack of the dual bound.
    pub dual_bound: f64,
    pub feasibility: f64,
    /// Largest `t` for the exhaustive mixing-bound check.
    pub mixing_horizon: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            tracking_identity: 1e-9,
            dual_mean: 1e-12,
            dual_bound: 1e-12,
            feasibility: 1e-9,
            mixing_horizon: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantReport {
    pub tracking_identity_max_residual: f64,
    pub tracking_identity_ok: bool,
    pub dual_mean_max_residual: f64,
    pub dual_mean_ok: bool,
    pub dual_nonnegative_ok: bool,
    pub feasibility_max_violation: f64,
    pub feasibility_ok: bool,
    /// `max_{i,t} max(‖λ_{i,t}‖, ‖μ_{i,t}‖)·γ_t / max_{j,s} ‖z_{j,s}‖`.
    pub dual_bound_max_ratio: f64,
    pub dual_bound_ok: bool,
    pub mixing_bound_max_ratio: f64,
    pub mixing_bound_ok: bool,
    /// `max_t Σ_i ‖λ_{i,t} − λ̄_t‖ / (D α_{t−1})` with `D` from the run's constants.
    pub consensus_decay_max_ratio: f64,
    pub consensus_decay_ok: bool,
    /// `max_{i,t} max(‖y_{i,t}‖, ‖z_{i,t}‖)`.
    pub tracking_state_max: f64,
    /// Max over the second half of the run divided by the max over the first.
    pub tracking_state_growth: f64,
    pub max_abs_objective: f64,
    pub max_constraint_norm: f64,
    pub bounded_ok: bool,
    pub regret_lower_bound_ok: Option<bool>,
    pub finite_ok: bool,
    pub passed: bool,
}

struct Scan {
    tracking: f64,
    dual_mean: f64,
    lambda_scale: f64,
    nonneg: bool,
    infeasible: f64,
    z_max: f64,
    yz_max: f64,
    yz_first: f64,
    yz_second: f64,
    f_max: f64,
    g_max: f64,
}

fn scan(trace: &RunTrace, problems: &[NodeProblem]) -> Scan {
    let half = trace.len() / 2;
    let mut s = Scan {
        tracking: 0.0,
        dual_mean: 0.0,
        lambda_scale: 0.0,
        nonneg: true,
        infeasible: 0.0,
        z_max: 0.0,
        yz_max: 0.0,
        yz_first: 0.0,
        yz_second: 0.0,
        f_max: 0.0,
        g_max: 0.0,
    };
    for (k, rec) in trace.steps.iter().enumerate() {
        let n = rec.aggregate_g.len();
        s.tracking = s.tracking.max(dist(&rec.y_bar, &rec.aggregate_g));
        let mu_bar = crate::vecops::mean(rec.states.iter().map(|st| st.mu.as_slice()), n);
        s.dual_mean = s.dual_mean.max(dist(&mu_bar, &rec.lambda_bar));
        for (st, p) in rec.states.iter().zip(problems) {
            s.lambda_scale = s.lambda_scale.max(norm(&st.lambda)).max(norm(&st.mu));
            s.nonneg &= st.lambda.iter().chain(&st.mu).all(|v| *v >= 0.0);
            let projected = p.feasible_set().project_unchecked(&st.x);
            s.infeasible = s.infeasible.max(dist(&projected, &st.x));
            let zn = norm(&st.z);
            let yz = zn.max(norm(&st.y));
            s.z_max = s.z_max.max(zn);
            s.yz_max = s.yz_max.max(yz);
            if k < half {
                s.yz_first = s.yz_first.max(yz);
            } else {
                s.yz_second = s.yz_second.max(yz);
            }
        }
        for (f, g) in rec.objectives.iter().zip(&rec.constraints) {
            s.f_max = s.f_max.max(f.abs());
            s.g_max = s.g_max.max(norm(g));
        }
    }
    s
}

/// Runs every check on a distributed trace.
///
/// `optima` and `regret` enable the regret lower-bound sanity check.
pub fn check_invariants(
    trace: &RunTrace,
    problems: &[NodeProblem],
    graph: &GraphSequence,
    optima: Option<&[StepOptimum]>,
    regret: Option<&[f64]>,
    tol: &Tolerances,
) -> InvariantReport {
    let s = scan(trace, problems);
    let nodes = problems.len() as f64;

    let dual_ratio = trace
        .steps
        .iter()
        .flat_map(|rec| {
            rec.states
                .iter()
                .map(move |st| norm(&st.lambda).max(norm(&st.mu)) * rec.gamma)
        })
        .fold(0.0, f64::max);
    let dual_bound_ok = dual_ratio <= s.z_max + tol.dual_bound * s.z_max.max(1.0);
    let dual_bound_max_ratio = if s.z_max > 0.0 {
        dual_ratio / s.z_max
    } else if dual_ratio == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };

    let distributed = trace.meta.mode == RunMode::Distributed;
    let mixing = mixing_bound(graph);
    let (mixing_ratio, consensus_ratio) = match (&mixing, distributed) {
        (Ok(mc), true) => {
            let mixing_ratio = mixing_bound_ratio(graph, mc, tol.mixing_horizon.min(trace.len().max(1)));
            let c = s.yz_max;
            let d = if mc.tau < 1.0 {
                2.0 * nodes * nodes * mc.c_hat * c / (1.0 - mc.tau) + 2.0 * nodes * c
            } else {
                f64::INFINITY
            };
            let mut worst: f64 = 0.0;
            for w in trace.steps.windows(2) {
                let (prev, rec) = (&w[0], &w[1]);
                let spread: f64 = rec
                    .states
                    .iter()
                    .map(|st| dist(&st.lambda, &rec.lambda_bar))
                    .sum();
                let bound = d * prev.alpha;
                let ratio = if spread == 0.0 { 0.0 } else { spread / bound };
                worst = worst.max(ratio);
            }
            (mixing_ratio, worst)
        }
        (Ok(_), false) => (0.0, 0.0),
        (Err(_), _) => (f64::INFINITY, f64::INFINITY),
    };

    let regret_lower_bound_ok = match (optima, regret) {
        (Some(opt), Some(reg)) => {
            let mut grad_max: f64 = 0.0;
            for (rec, o) in trace.steps.iter().zip(opt) {
                for (i, p) in problems.iter().enumerate() {
                    if let Ok(step) = p.step(rec.t) {
                        grad_max = grad_max
                            .max(norm(&step.objective.gradient(&rec.states[i].x)))
                            .max(norm(&step.objective.gradient(&o.x_star[i])));
                    }
                }
            }
            let eta = problems
                .iter()
                .map(|p| p.feasible_set().norm_bound())
                .fold(0.0, f64::max);
            Some(reg.iter().enumerate().all(|(k, r)| {
                let t = (k + 1) as f64;
                *r >= -2.0 * grad_max * eta * nodes * t * (1.0 + 1e-12) - 1e-9
            }))
        }
        _ => None,
    };

    let tracking_identity_ok = s.tracking <= tol.tracking_identity;
    let dual_mean_ok = s.dual_mean <= tol.dual_mean * s.lambda_scale.max(1.0);
    let feasibility_ok = s.infeasible <= tol.feasibility;
    let mixing_bound_ok = mixing_ratio <= 1.0;
    let consensus_decay_ok = consensus_ratio <= 1.0;
    let bounded_ok = s.f_max.is_finite() && s.g_max.is_finite() && s.yz_max.is_finite();
    let finite_ok = trace.failure.is_none();
    let passed = tracking_identity_ok
        && dual_mean_ok
        && s.nonneg
        && feasibility_ok
        && dual_bound_ok
        && mixing_bound_ok
        && consensus_decay_ok
        && bounded_ok
        && finite_ok
        && regret_lower_bound_ok.unwrap_or(true);

    InvariantReport {
        tracking_identity_max_residual: s.tracking,
        tracking_identity_ok,
        dual_mean_max_residual: s.dual_mean,
        dual_mean_ok,
        dual_nonnegative_ok: s.nonneg,
        feasibility_max_violation: s.infeasible,
        feasibility_ok,
        dual_bound_max_ratio,
        dual_bound_ok,
        mixing_bound_max_ratio: mixing_ratio,
        mixing_bound_ok,
        consensus_decay_max_ratio: consensus_ratio,
        consensus_decay_ok,
        tracking_state_max: s.yz_max,
        tracking_state_growth: if s.yz_first > 0.0 {
            s.yz_second / s.yz_first
        } else {
            0.0
        },
        max_abs_objective: s.f_max,
        max_constraint_norm: s.g_max,
        bounded_ok,
        regret_lower_bound_ok,
        finite_ok,
        passed,
    }
}
