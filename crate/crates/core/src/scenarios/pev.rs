//! Charging-schedule preset with vector-valued coupled constraints.
//!
//! Vehicle `i` at step `t`:
//! `f = (a/2)‖x‖² + βᵀx`, `g = A x − d` with `A ∈ ℝ^{n×d_i}`, `Ω_i = [0, 1]^{d_i}`.
//! Coefficients start from uniform draws and follow a clamped random walk of
//! half-width `increment`; `a` stays at or above [`super::synthetic::CURVATURE_FLOOR`],
//! `A` and `d` stay nonnegative.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::synthetic::CURVATURE_FLOOR;
use super::{rng_for, stream};
use crate::error::{Error, Result};
use crate::problem::{FeasibleSet, IsoQuadratic, NodeProblem, StepFunctions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PevSpec {
    pub nodes: usize,
    pub dim: usize,
    /// Constraint dimension `n`.
    pub constraints: usize,
    pub horizon: usize,
    pub seed: u64,
    pub a_range: (f64, f64),
    pub beta_range: (f64, f64),
    pub matrix_range: (f64, f64),
    pub demand_range: (f64, f64),
    pub increment: f64,
    /// Multiplies every `A_{i,t}`; 0 leaves the constraint slack.
    pub coupling: f64,
}

impl Default for PevSpec {
    fn default() -> Self {
        Self {
            nodes: 5,
            dim: 2,
            constraints: 3,
            horizon: 100,
            seed: 0,
            a_range: (1.0, 3.0),
            beta_range: (-1.0, 0.0),
            matrix_range: (0.5, 1.5),
            demand_range: (0.2, 0.6),
            increment: 0.01,
            coupling: 1.0,
        }
    }
}

impl PevSpec {
    fn validate(&self) -> Result<()> {
        if self.nodes == 0 || self.dim == 0 || self.constraints == 0 || self.horizon == 0 {
            return Err(Error::Config(
                "pev scenario needs nodes, dim, constraints and horizon ≥ 1".into(),
            ));
        }
        for (name, (lo, hi)) in [
            ("a_range", self.a_range),
            ("beta_range", self.beta_range),
            ("matrix_range", self.matrix_range),
            ("demand_range", self.demand_range),
        ] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::Config(format!("{name} must be a finite interval, got ({lo}, {hi})")));
            }
        }
        if self.a_range.0 <= 0.0 {
            return Err(Error::Config("pev a_range must be positive".into()));
        }
        if self.matrix_range.0 < 0.0 || self.demand_range.0 < 0.0 {
            return Err(Error::Config("pev matrix_range and demand_range must be nonnegative".into()));
        }
        if !(self.increment >= 0.0 && self.increment.is_finite()) {
            return Err(Error::Config("pev increment must be finite and nonnegative".into()));
        }
        if !(self.coupling >= 0.0 && self.coupling.is_finite()) {
            return Err(Error::Config("pev coupling must be finite and nonnegative".into()));
        }
        Ok(())
    }
}

fn draw(rng: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..hi)
    }
}

fn step(rng: &mut impl Rng, w: f64) -> f64 {
    if w == 0.0 {
        0.0
    } else {
        rng.gen_range(-w..w)
    }
}

pub fn build_pev(spec: &PevSpec) -> Result<Vec<NodeProblem>> {
    spec.validate()?;
    let (d, n) = (spec.dim, spec.constraints);
    (0..spec.nodes)
        .map(|i| {
            let mut init = rng_for(spec.seed, i, stream::PEV_INIT);
            let mut walk = rng_for(spec.seed, i, stream::PEV_WALK);
            let mut a = draw(&mut init, spec.a_range);
            let mut beta: Vec<f64> = (0..d).map(|_| draw(&mut init, spec.beta_range)).collect();
            let mut mat: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..d).map(|_| draw(&mut init, spec.matrix_range)).collect())
                .collect();
            let mut dem: Vec<f64> = (0..n).map(|_| draw(&mut init, spec.demand_range)).collect();
            let mut steps = Vec::with_capacity(spec.horizon);
            for t in 0..spec.horizon {
                if t > 0 {
                    a = (a + step(&mut walk, spec.increment)).max(CURVATURE_FLOOR);
                    for v in &mut beta {
                        *v += step(&mut walk, spec.increment);
                    }
                    for v in mat.iter_mut().flatten() {
                        *v = (*v + step(&mut walk, spec.increment)).max(0.0);
                    }
                    for v in &mut dem {
                        *v = (*v + step(&mut walk, spec.increment)).max(0.0);
                    }
                }
                steps.push(StepFunctions {
                    objective: IsoQuadratic::new(a / 2.0, beta.clone(), 0.0),
                    constraints: mat
                        .iter()
                        .zip(&dem)
                        .map(|(row, dr)| IsoQuadratic::affine(row.iter().map(|v| v * spec.coupling).collect(), -dr))
                        .collect(),
                });
            }
            NodeProblem::new(i, FeasibleSet::boxed(vec![0.0; d], vec![1.0; d])?, steps)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_and_determinism() {
        let spec = PevSpec::default();
        let p = build_pev(&spec).unwrap();
        assert_eq!(p.len(), 5);
        assert!(p.iter().all(|q| q.dim() == 2 && q.n_constraints() == 3 && q.horizon() == 100));
        assert_eq!(p, build_pev(&spec).unwrap());
        let other = build_pev(&PevSpec { seed: 1, ..spec }).unwrap();
        assert_ne!(p, other);
    }

    #[test]
    fn single_constraint_is_linear() {
        let p = build_pev(&PevSpec { constraints: 1, ..PevSpec::default() }).unwrap();
        for q in &p {
            let s = q.step(7).unwrap();
            assert_eq!(s.constraints.len(), 1);
            assert_eq!(s.constraints[0].curvature, 0.0);
        }
    }

    #[test]
    fn coefficients_stay_in_guard() {
        let spec = PevSpec { increment: 0.5, horizon: 400, ..PevSpec::default() };
        for q in build_pev(&spec).unwrap() {
            for t in 1..=400 {
                let s = q.step(t).unwrap();
                assert!(s.objective.curvature >= CURVATURE_FLOOR / 2.0);
                for c in &s.constraints {
                    assert!(c.linear.iter().all(|v| *v >= 0.0));
                    assert!(c.offset <= 0.0);
                }
            }
        }
    }

    #[test]
    fn zero_coupling_constraint_slack() {
        let p = build_pev(&PevSpec { coupling: 0.0, ..PevSpec::default() }).unwrap();
        for q in &p {
            let g = q.constraint(5, &[1.0, 1.0]).unwrap();
            assert!(g.iter().all(|v| *v <= 0.0));
        }
    }
}
