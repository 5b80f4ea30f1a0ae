//! Random-walk quadratic problems on balls.
//!
//! Node `i` at time `t`:
//! `f = a‖x‖² + bᵀx`, `g = c‖x‖² + qᵀx + e`, `Ω = {‖x‖ ≤ radius}`.
//! After the initial draw, each step adds one `ε₁ ~ U[−w, w]^d` to both `b`
//! and `q`, and one `ε₂ ~ U[−w, w]` to `a` and `c` and `10ε₂` to `e`. `a` and
//! `c` are floored at [`CURVATURE_FLOOR`] to stay convex.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{rng_for, stream};
use crate::error::{Error, Result};
use crate::problem::{FeasibleSet, IsoQuadratic, NodeProblem, StepFunctions};

pub const CURVATURE_FLOOR: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub nodes: usize,
    /// Decision dimension per node; a single entry applies to every node.
    pub dims: Vec<usize>,
    pub horizon: usize,
    pub seed: u64,
    pub b_range: (f64, f64),
    pub q_range: (f64, f64),
    pub a_range: (f64, f64),
    pub c_range: (f64, f64),
    pub e_range: (f64, f64),
    /// Half-width `w` of the increments.
    pub increment: f64,
    pub e_increment_factor: f64,
    pub radius: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            nodes: 5,
            dims: vec![3],
            horizon: 200,
            seed: 0,
            b_range: (0.0, 10.0),
            q_range: (0.0, 5.0),
            a_range: (1.0, 15.0),
            c_range: (1.0, 5.0),
            e_range: (-30.0, 0.0),
            increment: 0.05,
            e_increment_factor: 10.0,
            radius: 300.0,
        }
    }
}

impl SyntheticSpec {
    pub fn dim_of(&self, node: usize) -> Result<usize> {
        match self.dims.len() {
            1 => Ok(self.dims[0]),
            len if len == self.nodes => Ok(self.dims[node]),
            len => Err(Error::Config(format!(
                "synthetic dims lists {len} entries for {} nodes",
                self.nodes
            ))),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.nodes == 0 || self.horizon == 0 {
            return Err(Error::Config("synthetic scenario needs nodes ≥ 1 and horizon ≥ 1".into()));
        }
        for (name, (lo, hi)) in [
            ("b_range", self.b_range),
            ("q_range", self.q_range),
            ("a_range", self.a_range),
            ("c_range", self.c_range),
            ("e_range", self.e_range),
        ] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::Config(format!("{name} must be a finite interval, got ({lo}, {hi})")));
            }
        }
        if !(self.increment >= 0.0 && self.increment.is_finite()) {
            return Err(Error::Config("increment must be nonnegative".into()));
        }
        Ok(())
    }
}

fn uniform<R: Rng>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.gen_range(lo..hi)
    } else {
        lo
    }
}

pub fn build_synthetic(spec: &SyntheticSpec) -> Result<Vec<NodeProblem>> {
    spec.validate()?;
    (0..spec.nodes)
        .map(|i| {
            let d = spec.dim_of(i)?;
            if d == 0 {
                return Err(Error::Config(format!("node {i} has dimension 0")));
            }
            let mut init = rng_for(spec.seed, i, stream::SYNTHETIC_INIT);
            let mut walk = rng_for(spec.seed, i, stream::SYNTHETIC_WALK);
            let mut b: Vec<f64> = (0..d).map(|_| uniform(&mut init, spec.b_range)).collect();
            let mut q: Vec<f64> = (0..d).map(|_| uniform(&mut init, spec.q_range)).collect();
            let mut a = uniform(&mut init, spec.a_range).max(CURVATURE_FLOOR);
            let mut c = uniform(&mut init, spec.c_range).max(CURVATURE_FLOOR);
            let mut e = uniform(&mut init, spec.e_range);
            let w = (-spec.increment, spec.increment);

            let mut steps = Vec::with_capacity(spec.horizon);
            for t in 1..=spec.horizon {
                if t > 1 {
                    let eps1: Vec<f64> = (0..d).map(|_| uniform(&mut walk, w)).collect();
                    let eps2 = uniform(&mut walk, w);
                    for k in 0..d {
                        b[k] += eps1[k];
                        q[k] += eps1[k];
                    }
                    a = (a + eps2).max(CURVATURE_FLOOR);
                    c = (c + eps2).max(CURVATURE_FLOOR);
                    e += spec.e_increment_factor * eps2;
                }
                steps.push(StepFunctions {
                    objective: IsoQuadratic::new(a, b.clone(), 0.0),
                    constraints: vec![IsoQuadratic::new(c, q.clone(), e)],
                });
            }
            NodeProblem::new(i, FeasibleSet::ball(spec.radius, d)?, steps)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_seed() {
        let spec = SyntheticSpec {
            seed: 42,
            ..Default::default()
        };
        assert_eq!(build_synthetic(&spec).unwrap(), build_synthetic(&spec).unwrap());
        let other = SyntheticSpec {
            seed: 43,
            ..Default::default()
        };
        assert_ne!(build_synthetic(&spec).unwrap(), build_synthetic(&other).unwrap());
    }

    #[test]
    fn zero_increments_freeze_functions() {
        let spec = SyntheticSpec {
            increment: 0.0,
            horizon: 20,
            ..Default::default()
        };
        for p in build_synthetic(&spec).unwrap() {
            let first = p.step(1).unwrap().clone();
            for t in 2..=20 {
                assert_eq!(p.step(t).unwrap(), &first);
            }
        }
    }

    #[test]
    fn curvature_stays_in_walk_range() {
        let spec = SyntheticSpec::default();
        let upper = spec.a_range.1 + spec.increment * spec.horizon as f64;
        for p in build_synthetic(&spec).unwrap() {
            assert_eq!(p.dim(), 3);
            for t in 1..=spec.horizon {
                let s = p.step(t).unwrap();
                assert!(s.objective.curvature >= CURVATURE_FLOOR && s.objective.curvature <= upper);
                assert!(s.constraints[0].curvature >= CURVATURE_FLOOR);
            }
        }
    }

    #[test]
    fn floors_hold_over_long_walks() {
        // start at the floor so the walk keeps hitting it
        let spec = SyntheticSpec {
            a_range: (0.011, 0.012),
            c_range: (0.011, 0.012),
            increment: 0.5,
            horizon: 400,
            ..Default::default()
        };
        for p in build_synthetic(&spec).unwrap() {
            for t in 1..=spec.horizon {
                let s = p.step(t).unwrap();
                assert!(s.objective.curvature >= CURVATURE_FLOOR);
                assert!(s.constraints[0].curvature >= CURVATURE_FLOOR);
            }
        }
    }

    #[test]
    fn per_node_dimensions() {
        let spec = SyntheticSpec {
            nodes: 3,
            dims: vec![1, 2, 3],
            horizon: 2,
            ..Default::default()
        };
        let ps = build_synthetic(&spec).unwrap();
        assert_eq!(ps.iter().map(|p| p.dim()).collect::<Vec<_>>(), vec![1, 2, 3]);
        let bad = SyntheticSpec {
            nodes: 3,
            dims: vec![1, 2],
            ..Default::default()
        };
        assert!(build_synthetic(&bad).is_err());
    }
}
