//! Offline per-step optimum `x*_t = argmin { Σ f_i,t(x_i) : x ∈ Ω, Σ g_i,t(x_i) ≤ 0 }`.
//!
//! Both routes work on the dual. The Lagrangian `Σ f_i + νᵀ Σ g_i` separates
//! over nodes and each node minimizes its part in closed form
//! ([`NodeProblem::lagrangian_argmin`]).
//!
//! * `n = 1`: the aggregate constraint `G(ν)` is nonincreasing in the scalar
//!   multiplier, so `ν` is found by bracketing and bisection. The returned
//!   point always comes from the feasible end of the bracket.
//! * `n > 1`: accelerated projected gradient ascent on the concave dual, with
//!   restarts, stopped on the norm of the projected-gradient mapping.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{instance_shape, NodeProblem};
use crate::vecops::norm;

/// Upper limit of the multiplier bracket before declaring infeasibility.
pub const NU_MAX: f64 = 1e12;
/// Relative width at which the bisection bracket counts as collapsed.
pub const BRACKET_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleOptions {
    /// Constraint residual target.
    pub tolerance: f64,
    pub max_iters: usize,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iters: 200_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleMethod {
    Unconstrained,
    DualBisection,
    DualAscent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOptimum {
    pub t: usize,
    /// `x*_{i,t}` per node.
    pub x_star: Vec<Vec<f64>>,
    pub f_star: f64,
    /// `Σ_i g_{i,t}(x*_{i,t})`
    pub g_at_star: Vec<f64>,
    pub multiplier: Vec<f64>,
    pub method: OracleMethod,
    pub iterations: usize,
    /// Final stopping residual of the method used.
    pub residual: f64,
}

struct Evaluated {
    x: Vec<Vec<f64>>,
    g: Vec<f64>,
}

fn evaluate(problems: &[NodeProblem], t: usize, nu: &[f64]) -> Result<Evaluated> {
    let n = nu.len();
    let mut g = vec![0.0; n];
    let mut x = Vec::with_capacity(problems.len());
    for p in problems {
        let xi = p.lagrangian_argmin(t, nu)?;
        for (a, v) in g.iter_mut().zip(p.constraint(t, &xi)?) {
            *a += v;
        }
        x.push(xi);
    }
    Ok(Evaluated { x, g })
}

fn finish(
    problems: &[NodeProblem],
    t: usize,
    ev: Evaluated,
    multiplier: Vec<f64>,
    method: OracleMethod,
    iterations: usize,
    residual: f64,
) -> Result<StepOptimum> {
    let f_star = problems
        .iter()
        .zip(&ev.x)
        .map(|(p, x)| p.objective(t, x))
        .sum::<Result<f64>>()?;
    Ok(StepOptimum {
        t,
        x_star: ev.x,
        f_star,
        g_at_star: ev.g,
        multiplier,
        method,
        iterations,
        residual,
    })
}

/// Solves the coupled problem at time `t`.
pub fn solve_step(problems: &[NodeProblem], t: usize, opts: &OracleOptions) -> Result<StepOptimum> {
    let (n, _) = instance_shape(problems)?;
    let zero = vec![0.0; n];
    let free = evaluate(problems, t, &zero)?;
    if free.g.iter().all(|g| *g <= 0.0) {
        return finish(problems, t, free, zero, OracleMethod::Unconstrained, 0, 0.0);
    }
    if n == 1 {
        bisection(problems, t, opts)
    } else {
        dual_ascent(problems, t, opts)
    }
}

fn bisection(problems: &[NodeProblem], t: usize, opts: &OracleOptions) -> Result<StepOptimum> {
    let mut hi = 1.0;
    let mut iterations = 0usize;
    let mut at_hi = evaluate(problems, t, &[hi])?;
    while at_hi.g[0] > 0.0 {
        hi *= 2.0;
        iterations += 1;
        if hi > NU_MAX {
            return Err(Error::Infeasible {
                t,
                reason: format!(
                    "aggregate constraint still {:e} > 0 at multiplier {hi:e}",
                    at_hi.g[0]
                ),
            });
        }
        at_hi = evaluate(problems, t, &[hi])?;
    }
    let mut lo = if hi == 1.0 { 0.0 } else { hi / 2.0 };
    loop {
        let residual = -at_hi.g[0];
        if residual <= opts.tolerance || hi - lo <= BRACKET_TOL * hi.max(1.0) {
            return finish(problems, t, at_hi, vec![hi], OracleMethod::DualBisection, iterations, residual);
        }
        if iterations >= opts.max_iters {
            return Err(Error::NoConvergence {
                t,
                iterations,
                residual,
            });
        }
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        let at_mid = evaluate(problems, t, &[mid])?;
        if at_mid.g[0] > 0.0 {
            lo = mid;
        } else {
            hi = mid;
            at_hi = at_mid;
        }
    }
}

/// Upper bound on the Lipschitz constant of the dual gradient.
fn dual_lipschitz(problems: &[NodeProblem], t: usize) -> Result<f64> {
    let mut l = 0.0;
    for p in problems {
        let step = p.step(t)?;
        let eta = p.feasible_set().norm_bound();
        let jac_sq: f64 = step
            .constraints
            .iter()
            .map(|r| {
                let v = norm(&r.linear) + 2.0 * r.curvature * eta;
                v * v
            })
            .sum();
        l += jac_sq / (2.0 * step.objective.curvature);
    }
    Ok(l.max(f64::MIN_POSITIVE))
}

fn dual_ascent(problems: &[NodeProblem], t: usize, opts: &OracleOptions) -> Result<StepOptimum> {
    let n = problems[0].n_constraints();
    let lip = dual_lipschitz(problems, t)?;
    let ascend = |nu: &[f64], g: &[f64]| -> Vec<f64> {
        nu.iter().zip(g).map(|(v, gk)| (v + gk / lip).max(0.0)).collect()
    };

    let mut nu = vec![0.0; n];
    let mut momentum = nu.clone();
    let mut theta: f64 = 1.0;
    let mut residual = f64::INFINITY;
    for iterations in 0..opts.max_iters {
        // stopping test at the current iterate
        let here = evaluate(problems, t, &nu)?;
        let stepped = ascend(&nu, &here.g);
        residual = lip
            * stepped
                .iter()
                .zip(&nu)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
        if residual <= opts.tolerance {
            return finish(problems, t, here, nu, OracleMethod::DualAscent, iterations, residual);
        }

        let at_mom = evaluate(problems, t, &momentum)?;
        let next = ascend(&momentum, &at_mom.g);
        let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
        // restart when the step moves against the gradient at the momentum point
        let against: f64 = at_mom
            .g
            .iter()
            .zip(next.iter().zip(&nu))
            .map(|(g, (a, b))| g * (a - b))
            .sum();
        if against < 0.0 {
            theta = 1.0;
            momentum = nu.clone();
            continue;
        }
        let beta = (theta - 1.0) / theta_next;
        momentum = next
            .iter()
            .zip(&nu)
            .map(|(a, b)| (a + beta * (a - b)).max(0.0))
            .collect();
        nu = next;
        theta = theta_next;
        if nu.iter().any(|v| *v > NU_MAX) {
            return Err(Error::Infeasible {
                t,
                reason: format!("multiplier exceeded {NU_MAX:e}"),
            });
        }
    }
    Err(Error::NoConvergence {
        t,
        iterations: opts.max_iters,
        residual,
    })
}

/// Optima for `t = 1..=horizon`, solved in parallel.
pub fn solve_horizon(problems: &[NodeProblem], horizon: usize, opts: &OracleOptions) -> Result<Vec<StepOptimum>> {
    (1..=horizon)
        .into_par_iter()
        .map(|t| solve_step(problems, t, opts))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{FeasibleSet, IsoQuadratic, QuadraticScalarCost, StepFunctions};
    use approx::assert_relative_eq;

    fn dispatch_single(demand: f64) -> Vec<NodeProblem> {
        let cost = QuadraticScalarCost::new(0.040, -0.120, 100.0).unwrap();
        let step = StepFunctions {
            objective: cost.at_price(1.0),
            constraints: vec![IsoQuadratic::affine(vec![-1.0], demand)],
        };
        vec![NodeProblem::new(0, FeasibleSet::boxed(vec![0.0], vec![1e6]).unwrap(), vec![step]).unwrap()]
    }

    /// Grid search over [0, 100] at step 1e-4 restricted to x ≥ D.
    fn grid_single(demand: f64) -> f64 {
        let cost = |x: f64| 0.04 * x * x + (-0.12 - 1.0) * x + 100.0;
        (0..=1_000_000)
            .map(|k| k as f64 * 1e-4)
            .filter(|x| demand - x <= 0.0)
            .min_by(|a, b| cost(*a).partial_cmp(&cost(*b)).unwrap())
            .unwrap()
    }

    #[test]
    fn slack_demand_gives_unconstrained_minimizer() {
        let opt = solve_step(&dispatch_single(10.0), 1, &OracleOptions::default()).unwrap();
        assert_relative_eq!(opt.x_star[0][0], 14.0, epsilon = 1e-12);
        assert_eq!(opt.multiplier, vec![0.0]);
        assert_eq!(opt.method, OracleMethod::Unconstrained);
        assert_relative_eq!(grid_single(10.0), 14.0, epsilon = 1e-4);
    }

    #[test]
    fn binding_demand_is_met_with_equality() {
        let opt = solve_step(&dispatch_single(20.0), 1, &OracleOptions::default()).unwrap();
        assert!((opt.x_star[0][0] - 20.0).abs() <= 1e-8);
        assert!(opt.g_at_star[0] <= 1e-8);
        assert_relative_eq!(grid_single(20.0), 20.0, epsilon = 1e-4);
        // multiplier from stationarity: 2a·20 + b − p − ν = 0
        assert_relative_eq!(opt.multiplier[0], 0.48, epsilon = 1e-6);
    }

    #[test]
    fn infeasible_instance_is_reported() {
        // g(x) = 1 cannot be made ≤ 0
        let step = StepFunctions {
            objective: IsoQuadratic::new(1.0, vec![0.0], 0.0),
            constraints: vec![IsoQuadratic::affine(vec![0.0], 1.0)],
        };
        let p = NodeProblem::new(0, FeasibleSet::ball(1.0, 1).unwrap(), vec![step]).unwrap();
        assert!(matches!(
            solve_step(&[p], 1, &OracleOptions::default()),
            Err(Error::Infeasible { .. })
        ));
    }

    #[test]
    fn capacity_bound_makes_demand_infeasible() {
        let cost = QuadraticScalarCost::new(0.04, 0.0, 0.0).unwrap();
        let step = StepFunctions {
            objective: cost.at_price(0.0),
            constraints: vec![IsoQuadratic::affine(vec![-1.0], 50.0)],
        };
        let p = NodeProblem::new(0, FeasibleSet::boxed(vec![0.0], vec![10.0]).unwrap(), vec![step]).unwrap();
        assert!(matches!(
            solve_step(&[p], 1, &OracleOptions::default()),
            Err(Error::Infeasible { .. })
        ));
    }

    #[test]
    fn vector_constraints_converge_to_kkt_point() {
        // two nodes in R², n = 2 affine rows, solution checked by KKT
        let mk = |id, lin: Vec<f64>, rows: Vec<(Vec<f64>, f64)>| {
            let step = StepFunctions {
                objective: IsoQuadratic::new(0.5, lin, 0.0),
                constraints: rows.into_iter().map(|(q, e)| IsoQuadratic::affine(q, e)).collect(),
            };
            NodeProblem::new(id, FeasibleSet::boxed(vec![0.0; 2], vec![5.0; 2]).unwrap(), vec![step]).unwrap()
        };
        let problems = vec![
            mk(0, vec![-2.0, -1.0], vec![(vec![1.0, 1.0], -0.5), (vec![1.0, 0.0], -0.2)]),
            mk(1, vec![-1.0, -2.0], vec![(vec![1.0, 0.5], -0.5), (vec![0.0, 1.0], -1.0)]),
        ];
        let opt = solve_step(&problems, 1, &OracleOptions::default()).unwrap();
        assert_eq!(opt.method, OracleMethod::DualAscent);
        for g in &opt.g_at_star {
            assert!(*g <= 1e-8);
        }
        // complementary slackness and stationarity (interior of the box)
        for (k, (nu, g)) in opt.multiplier.iter().zip(&opt.g_at_star).enumerate() {
            assert!(nu * g.abs() <= 1e-6, "row {k}: ν={nu}, g={g}");
        }
        // no feasible perturbation along a coarse grid does better
        let f = |x: &[Vec<f64>]| -> f64 {
            problems.iter().zip(x).map(|(p, xi)| p.objective(1, xi).unwrap()).sum()
        };
        let feasible = |x: &[Vec<f64>]| -> bool {
            let mut g = [0.0; 2];
            for (p, xi) in problems.iter().zip(x) {
                for (a, v) in g.iter_mut().zip(p.constraint(1, xi).unwrap()) {
                    *a += v;
                }
            }
            g.iter().all(|v| *v <= 0.0)
        };
        let steps: Vec<f64> = (0..=40).map(|k| k as f64 * 0.025).collect();
        let mut best = f64::INFINITY;
        for a in &steps {
            for b in &steps {
                for c in &steps {
                    for d in &steps {
                        let x = vec![vec![*a, *b], vec![*c, *d]];
                        if feasible(&x) {
                            best = best.min(f(&x));
                        }
                    }
                }
            }
        }
        assert!(opt.f_star <= best + 1e-9, "{} vs grid {}", opt.f_star, best);
        assert!(best - opt.f_star < 0.05);
    }
}
