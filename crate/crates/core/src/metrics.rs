//! Dynamic regret, constraint violation and path length.

use serde::{Deserialize, Serialize};

use crate::engine::RunTrace;
use crate::error::{Error, Result};
use crate::oracle::StepOptimum;
use crate::vecops::{dist, norm};

/// `P_T = Σ_{t=2}^{T} Σ_i ‖x*_{i,t} − x*_{i,t−1}‖`.
pub fn path_length(optima: &[StepOptimum]) -> f64 {
    optima
        .windows(2)
        .map(|w| {
            w[1].x_star
                .iter()
                .zip(&w[0].x_star)
                .map(|(a, b)| dist(a, b))
                .sum::<f64>()
        })
        .sum()
}

/// Cumulative `Reg_t = Σ_{s≤t} Σ_i (f_{i,s}(x_{i,s}) − f_{i,s}(x*_{i,s}))`.
pub fn dynamic_regret(trace: &RunTrace, optima: &[StepOptimum]) -> Result<Vec<f64>> {
    if trace.len() != optima.len() {
        return Err(Error::Contract(format!(
            "trace covers {} steps but {} optima were supplied",
            trace.len(),
            optima.len()
        )));
    }
    let mut acc = 0.0;
    trace
        .steps
        .iter()
        .zip(optima)
        .map(|(rec, opt)| {
            if rec.t != opt.t {
                return Err(Error::Contract(format!(
                    "trace step {} paired with optimum for t={}",
                    rec.t, opt.t
                )));
            }
            acc += rec.objective_total() - opt.f_star;
            Ok(acc)
        })
        .collect()
}

/// `Vio_t = ‖[Σ_{s≤t} Σ_i g_{i,s}(x_{i,s})]₊‖`: summed over time, then
/// clipped, then normed.
pub fn constraint_violation(trace: &RunTrace) -> Vec<f64> {
    let n = trace.steps.first().map_or(0, |r| r.aggregate_g.len());
    let mut cum = vec![0.0; n];
    trace
        .steps
        .iter()
        .map(|rec| {
            for (c, g) in cum.iter_mut().zip(&rec.aggregate_g) {
                *c += g;
            }
            let clipped: Vec<f64> = cum.iter().map(|v| v.max(0.0)).collect();
            norm(&clipped)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimaSummary {
    pub max_iterations: usize,
    pub max_residual: f64,
    /// Largest component of `g_t(x*_t)` over the horizon.
    pub max_constraint_at_optimum: f64,
    pub binding_steps: usize,
}

impl OptimaSummary {
    pub fn from_optima(optima: &[StepOptimum]) -> Self {
        Self {
            max_iterations: optima.iter().map(|o| o.iterations).max().unwrap_or(0),
            max_residual: optima.iter().map(|o| o.residual).fold(0.0, f64::max),
            max_constraint_at_optimum: optima
                .iter()
                .flat_map(|o| o.g_at_star.iter().copied())
                .fold(f64::NEG_INFINITY, f64::max),
            binding_steps: optima
                .iter()
                .filter(|o| o.multiplier.iter().any(|v| *v > 0.0))
                .count(),
        }
    }
}

/// Series and summaries computed from one finished run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Absent when the oracle was skipped.
    pub regret_series: Option<Vec<f64>>,
    pub violation_series: Vec<f64>,
    pub path_length: Option<f64>,
    pub optima: Option<OptimaSummary>,
}

impl MetricsReport {
    pub fn compute(trace: &RunTrace, optima: Option<&[StepOptimum]>) -> Result<Self> {
        let violation_series = constraint_violation(trace);
        let (regret_series, path, summary) = match optima {
            Some(opt) => (
                Some(dynamic_regret(trace, opt)?),
                Some(path_length(opt)),
                Some(OptimaSummary::from_optima(opt)),
            ),
            None => (None, None, None),
        };
        Ok(Self {
            regret_series,
            violation_series,
            path_length: path,
            optima: summary,
        })
    }

    pub fn final_regret(&self) -> Option<f64> {
        self.regret_series.as_ref().and_then(|r| r.last().copied())
    }

    pub fn final_violation(&self) -> Option<f64> {
        self.violation_series.last().copied()
    }
}
