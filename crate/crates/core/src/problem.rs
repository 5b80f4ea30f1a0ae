//! Per-node problem data: feasible sets, time-indexed objective and
//! constraint functions, and their gradients.
//!
//! Every function family used by the scenarios is an *isotropic quadratic*
//!
//! ```text
//!   q(x) = k·‖x‖² + lᵀx + o
//! ```
//!
//! with `k > 0` for objectives and `k ≥ 0` for constraint rows. This keeps
//! gradients analytic and makes the Lagrangian `f + νᵀg` minimizable in closed
//! form over a ball or box, which the per-step oracle relies on.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vecops::{dot, norm, norm_sq};

/// Closed, bounded, convex local feasible set `Ω_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FeasibleSet {
    /// `{x : ‖x‖ ≤ radius}` in `dim` dimensions.
    Ball { radius: f64, dim: usize },
    /// `{x : lower ≤ x ≤ upper}` componentwise.
    Box { lower: Vec<f64>, upper: Vec<f64> },
}

impl FeasibleSet {
    pub fn ball(radius: f64, dim: usize) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::InvalidInput(format!(
                "ball radius must be positive and finite, got {radius}"
            )));
        }
        if dim == 0 {
            return Err(Error::InvalidInput("ball dimension must be positive".into()));
        }
        Ok(FeasibleSet::Ball { radius, dim })
    }

    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                context: "box bounds",
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if lower.is_empty() {
            return Err(Error::InvalidInput("box dimension must be positive".into()));
        }
        for (k, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !(l.is_finite() && u.is_finite()) || l > u {
                return Err(Error::InvalidInput(format!(
                    "box bound {k} invalid: lower={l}, upper={u}"
                )));
            }
        }
        Ok(FeasibleSet::Box { lower, upper })
    }

    pub fn dim(&self) -> usize {
        match self {
            FeasibleSet::Ball { dim, .. } => *dim,
            FeasibleSet::Box { lower, .. } => lower.len(),
        }
    }

    /// A bound `η` with `‖x‖ ≤ η` for every `x` in the set.
    pub fn norm_bound(&self) -> f64 {
        match self {
            FeasibleSet::Ball { radius, .. } => *radius,
            FeasibleSet::Box { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(l, u)| {
                    let m = l.abs().max(u.abs());
                    m * m
                })
                .sum::<f64>()
                .sqrt(),
        }
    }

    /// Axis-aligned box containing the set.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            FeasibleSet::Ball { radius, dim } => (vec![-radius; *dim], vec![*radius; *dim]),
            FeasibleSet::Box { lower, upper } => (lower.clone(), upper.clone()),
        }
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        match self {
            FeasibleSet::Ball { radius, .. } => norm(x) <= radius + tol,
            FeasibleSet::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(v, (l, u))| *v >= l - tol && *v <= u + tol),
        }
    }

    /// Euclidean projection onto the set.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "projection",
                expected: self.dim(),
                got: x.len(),
            });
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("projection of a non-finite vector".into()));
        }
        Ok(self.project_unchecked(x))
    }

    pub(crate) fn project_unchecked(&self, x: &[f64]) -> Vec<f64> {
        match self {
            FeasibleSet::Ball { radius, .. } => {
                let nx = norm(x);
                if nx <= *radius {
                    x.to_vec()
                } else {
                    let s = radius / nx;
                    x.iter().map(|v| v * s).collect()
                }
            }
            FeasibleSet::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(v, (l, u))| v.clamp(*l, *u))
                .collect(),
        }
    }
}

/// Projection `P_Ω(x)`.
pub fn project(set: &FeasibleSet, x: &[f64]) -> Result<Vec<f64>> {
    set.project(x)
}

/// `[v]₊`, the componentwise maximum with zero.
pub fn clip_nonneg(v: &[f64]) -> Result<Vec<f64>> {
    if v.iter().any(|x| x.is_nan()) {
        return Err(Error::InvalidInput("clip of a NaN vector".into()));
    }
    Ok(v.iter().map(|x| x.max(0.0)).collect())
}

/// `k·‖x‖² + lᵀx + o`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsoQuadratic {
    pub curvature: f64,
    pub linear: Vec<f64>,
    pub offset: f64,
}

impl IsoQuadratic {
    pub fn new(curvature: f64, linear: Vec<f64>, offset: f64) -> Self {
        Self {
            curvature,
            linear,
            offset,
        }
    }

    /// Affine function `lᵀx + o`.
    pub fn affine(linear: Vec<f64>, offset: f64) -> Self {
        Self::new(0.0, linear, offset)
    }

    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.curvature * norm_sq(x) + dot(&self.linear, x) + self.offset
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.linear)
            .map(|(xi, li)| 2.0 * self.curvature * xi + li)
            .collect()
    }

    fn is_finite(&self) -> bool {
        self.curvature.is_finite() && self.offset.is_finite() && self.linear.iter().all(|v| v.is_finite())
    }
}

/// Generator cost `a x² + b x + c` settled at a real-time price `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticScalarCost {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl QuadraticScalarCost {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) || !b.is_finite() || !c.is_finite() {
            return Err(Error::InvalidInput(format!(
                "generation cost needs finite coefficients with a > 0 (a={a}, b={b}, c={c})"
            )));
        }
        Ok(Self { a, b, c })
    }

    /// Net cost `a x² + b x + c − p x`.
    pub fn at_price(&self, price: f64) -> IsoQuadratic {
        IsoQuadratic::new(self.a, vec![self.b - price], self.c)
    }
}

/// Objective and constraint rows of one node at one time step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFunctions {
    pub objective: IsoQuadratic,
    pub constraints: Vec<IsoQuadratic>,
}

/// Value and first derivatives of a node's functions at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeEval {
    pub f: f64,
    pub grad_f: Vec<f64>,
    pub g: Vec<f64>,
    /// `n × d_i`, row-major by constraint.
    pub jac_g: Vec<Vec<f64>>,
}

/// Node `i`'s private data: `Ω_i` and the streams `f_{i,t}`, `g_{i,t}` for
/// `t = 1..=T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeProblem {
    id: usize,
    set: FeasibleSet,
    n_constraints: usize,
    steps: Vec<StepFunctions>,
}

impl NodeProblem {
    pub fn new(id: usize, set: FeasibleSet, steps: Vec<StepFunctions>) -> Result<Self> {
        let dim = set.dim();
        let first = steps
            .first()
            .ok_or_else(|| Error::InvalidInput(format!("node {id}: empty function stream")))?;
        let n = first.constraints.len();
        if n == 0 {
            return Err(Error::InvalidInput(format!("node {id}: no constraint rows")));
        }
        for (k, step) in steps.iter().enumerate() {
            let t = k + 1;
            if step.constraints.len() != n {
                return Err(Error::DimensionMismatch {
                    context: "constraint rows",
                    expected: n,
                    got: step.constraints.len(),
                });
            }
            let obj = &step.objective;
            if obj.dim() != dim {
                return Err(Error::DimensionMismatch {
                    context: "objective dimension",
                    expected: dim,
                    got: obj.dim(),
                });
            }
            if !obj.is_finite() || obj.curvature <= 0.0 {
                return Err(Error::InvalidInput(format!(
                    "node {id}, t={t}: objective must be finite with positive curvature"
                )));
            }
            for row in &step.constraints {
                if row.dim() != dim {
                    return Err(Error::DimensionMismatch {
                        context: "constraint dimension",
                        expected: dim,
                        got: row.dim(),
                    });
                }
                if !row.is_finite() || row.curvature < 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "node {id}, t={t}: constraint rows must be finite and convex"
                    )));
                }
            }
        }
        Ok(Self {
            id,
            set,
            n_constraints: n,
            steps,
        })
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn dim(&self) -> usize {
        self.set.dim()
    }

    pub fn n_constraints(&self) -> usize {
        self.n_constraints
    }

    pub fn horizon(&self) -> usize {
        self.steps.len()
    }

    pub fn feasible_set(&self) -> &FeasibleSet {
        &self.set
    }

    /// Functions at time `t` (1-based).
    pub fn step(&self, t: usize) -> Result<&StepFunctions> {
        if t == 0 || t > self.steps.len() {
            return Err(Error::OutOfRange {
                what: "time index",
                value: t.to_string(),
                range: format!("1..={}", self.steps.len()),
            });
        }
        Ok(&self.steps[t - 1])
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "decision vector",
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn objective(&self, t: usize, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        Ok(self.step(t)?.objective.value(x))
    }

    pub fn constraint(&self, t: usize, x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        Ok(self.step(t)?.constraints.iter().map(|r| r.value(x)).collect())
    }

    pub fn eval(&self, t: usize, x: &[f64]) -> Result<NodeEval> {
        self.check_point(x)?;
        let step = self.step(t)?;
        Ok(NodeEval {
            f: step.objective.value(x),
            grad_f: step.objective.gradient(x),
            g: step.constraints.iter().map(|r| r.value(x)).collect(),
            jac_g: step.constraints.iter().map(|r| r.gradient(x)).collect(),
        })
    }

    /// Exact minimizer of `f_{i,t}(x) + νᵀ g_{i,t}(x)` over `Ω_i` for `ν ≥ 0`.
    ///
    /// The Lagrangian is again an isotropic quadratic, so the minimizer is the
    /// projection of the unconstrained stationary point.
    pub fn lagrangian_argmin(&self, t: usize, nu: &[f64]) -> Result<Vec<f64>> {
        if nu.len() != self.n_constraints {
            return Err(Error::DimensionMismatch {
                context: "multiplier",
                expected: self.n_constraints,
                got: nu.len(),
            });
        }
        let step = self.step(t)?;
        let mut curv = step.objective.curvature;
        let mut lin = step.objective.linear.clone();
        for (row, &v) in step.constraints.iter().zip(nu) {
            curv += v * row.curvature;
            crate::vecops::axpy(v, &row.linear, &mut lin);
        }
        let stationary: Vec<f64> = lin.iter().map(|l| -l / (2.0 * curv)).collect();
        Ok(self.set.project_unchecked(&stationary))
    }
}

/// Checks that a node list forms one problem instance and returns `(n, T)`.
pub fn instance_shape(problems: &[NodeProblem]) -> Result<(usize, usize)> {
    let first = problems
        .first()
        .ok_or_else(|| Error::Contract("problem instance has no nodes".into()))?;
    let (n, horizon) = (first.n_constraints(), first.horizon());
    for p in problems {
        if p.n_constraints() != n {
            return Err(Error::Contract(format!(
                "node {} has constraint dimension {}, expected {n}",
                p.id(),
                p.n_constraints()
            )));
        }
        if p.horizon() != horizon {
            return Err(Error::Contract(format!(
                "node {} has horizon {}, expected {horizon}",
                p.id(),
                p.horizon()
            )));
        }
    }
    Ok((n, horizon))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn dispatch_node() -> NodeProblem {
        let cost = QuadraticScalarCost::new(0.040, -0.120, 100.0).unwrap();
        let step = StepFunctions {
            objective: cost.at_price(1.0),
            constraints: vec![IsoQuadratic::affine(vec![-1.0], 20.0)],
        };
        NodeProblem::new(0, FeasibleSet::boxed(vec![0.0], vec![1e6]).unwrap(), vec![step]).unwrap()
    }

    #[test]
    fn ball_projection_examples() {
        let ball = FeasibleSet::ball(300.0, 3).unwrap();
        assert_eq!(project(&ball, &[0.0, 0.0, 0.0]).unwrap(), vec![0.0, 0.0, 0.0]);
        let p = project(&ball, &[300.0, 400.0, 0.0]).unwrap();
        assert_relative_eq!(p[0], 180.0, epsilon = 1e-12);
        assert_relative_eq!(p[1], 240.0, epsilon = 1e-12);
        assert_eq!(p[2], 0.0);
    }

    #[test]
    fn box_projection_clamps() {
        let b = FeasibleSet::boxed(vec![0.0], vec![10.0]).unwrap();
        assert_eq!(project(&b, &[-3.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn projection_errors() {
        let ball = FeasibleSet::ball(1.0, 2).unwrap();
        assert!(matches!(
            project(&ball, &[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            project(&ball, &[f64::NAN, 0.0]),
            Err(Error::InvalidInput(_))
        ));
        assert!(matches!(
            project(&ball, &[f64::INFINITY, 0.0]),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn set_construction_rejects_bad_input() {
        assert!(FeasibleSet::ball(0.0, 2).is_err());
        assert!(FeasibleSet::ball(-1.0, 2).is_err());
        assert!(FeasibleSet::boxed(vec![1.0], vec![0.0]).is_err());
        assert!(FeasibleSet::boxed(vec![0.0, 0.0], vec![1.0]).is_err());
    }

    #[test]
    fn norm_bounds() {
        assert_eq!(FeasibleSet::ball(300.0, 3).unwrap().norm_bound(), 300.0);
        let b = FeasibleSet::boxed(vec![-3.0, 0.0], vec![1.0, 4.0]).unwrap();
        assert_relative_eq!(b.norm_bound(), 5.0);
    }

    #[test]
    fn clip_examples() {
        assert_eq!(clip_nonneg(&[-1.0, 2.0, 0.0]).unwrap(), vec![0.0, 2.0, 0.0]);
        assert_eq!(clip_nonneg(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(clip_nonneg(&[3.5]).unwrap(), vec![3.5]);
        assert!(clip_nonneg(&[f64::NAN]).is_err());
    }

    #[test]
    fn dispatch_eval_example() {
        let node = dispatch_node();
        let e = node.eval(1, &[0.0]).unwrap();
        assert_relative_eq!(e.f, 100.0);
        assert_relative_eq!(e.grad_f[0], -1.12, epsilon = 1e-15);
        // finite-difference cross-check of the gradient
        let h = 1e-6;
        let fd = (node.objective(1, &[h]).unwrap() - node.objective(1, &[-h]).unwrap()) / (2.0 * h);
        assert_relative_eq!(fd, -1.12, epsilon = 1e-8);
    }

    #[test]
    fn synthetic_eval_example() {
        let step = StepFunctions {
            objective: IsoQuadratic::new(1.0, vec![1.0, 1.0], 0.0),
            constraints: vec![IsoQuadratic::affine(vec![0.0, 0.0], -1.0)],
        };
        let node = NodeProblem::new(0, FeasibleSet::ball(300.0, 2).unwrap(), vec![step]).unwrap();
        let e = node.eval(1, &[0.0, 0.0]).unwrap();
        assert_eq!(e.f, 0.0);
        assert_eq!(e.grad_f, vec![1.0, 1.0]);
    }

    #[test]
    fn demand_share_constraint_example() {
        // g(x) = D/N - x with D = 100, N = 5
        let row = IsoQuadratic::affine(vec![-1.0], 100.0 / 5.0);
        assert_relative_eq!(row.value(&[30.0]), -10.0);
        assert_eq!(row.gradient(&[30.0]), vec![-1.0]);
    }

    #[test]
    fn eval_out_of_horizon() {
        let node = dispatch_node();
        assert!(matches!(node.eval(0, &[0.0]), Err(Error::OutOfRange { .. })));
        assert!(matches!(node.eval(2, &[0.0]), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn node_rejects_nonconvex_rows() {
        let step = StepFunctions {
            objective: IsoQuadratic::new(1.0, vec![0.0], 0.0),
            constraints: vec![IsoQuadratic::new(-1.0, vec![0.0], 0.0)],
        };
        assert!(NodeProblem::new(0, FeasibleSet::ball(1.0, 1).unwrap(), vec![step]).is_err());
    }

    #[test]
    fn lagrangian_argmin_matches_kkt() {
        // minimize 0.04x² + (-0.12 - 1)x - ν x over [0, 1e6]
        let node = dispatch_node();
        let x = node.lagrangian_argmin(1, &[0.0]).unwrap();
        assert_relative_eq!(x[0], 14.0, epsilon = 1e-12);
        let x = node.lagrangian_argmin(1, &[0.48]).unwrap();
        assert_relative_eq!(x[0], 20.0, epsilon = 1e-12);
    }

    fn arb_set() -> impl Strategy<Value = FeasibleSet> {
        prop_oneof![
            (0.1f64..50.0, 1usize..5).prop_map(|(r, d)| FeasibleSet::ball(r, d).unwrap()),
            prop::collection::vec((-20.0f64..20.0, 0.0f64..30.0), 1..5).prop_map(|v| {
                let lower: Vec<f64> = v.iter().map(|(l, _)| *l).collect();
                let upper: Vec<f64> = v.iter().map(|(l, w)| l + w).collect();
                FeasibleSet::boxed(lower, upper).unwrap()
            }),
        ]
    }

    fn arb_set_and_points() -> impl Strategy<Value = (FeasibleSet, Vec<f64>, Vec<f64>)> {
        arb_set().prop_flat_map(|s| {
            let d = s.dim();
            (
                Just(s),
                prop::collection::vec(-200.0f64..200.0, d),
                prop::collection::vec(-200.0f64..200.0, d),
            )
        })
    }

    proptest! {
        #[test]
        fn projection_idempotent_and_feasible((set, x, _) in arb_set_and_points()) {
            let p = set.project(&x).unwrap();
            prop_assert!(set.contains(&p, 1e-9));
            let pp = set.project(&p).unwrap();
            for (a, b) in p.iter().zip(&pp) {
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
            }
        }

        #[test]
        fn projection_nonexpansive((set, x, y) in arb_set_and_points()) {
            let px = set.project(&x).unwrap();
            let py = set.project(&y).unwrap();
            prop_assert!(crate::vecops::dist(&px, &py) <= crate::vecops::dist(&x, &y) + 1e-9);
        }

        #[test]
        fn clip_idempotent_nonexpansive(
            v in prop::collection::vec(-100.0f64..100.0, 1..6),
            w in prop::collection::vec(-100.0f64..100.0, 1..6),
        ) {
            let c = clip_nonneg(&v).unwrap();
            prop_assert!(c.iter().all(|x| *x >= 0.0));
            prop_assert_eq!(clip_nonneg(&c).unwrap(), c.clone());
            let m = v.len().min(w.len());
            let cw = clip_nonneg(&w[..m]).unwrap();
            prop_assert!(crate::vecops::dist(&c[..m], &cw) <= crate::vecops::dist(&v[..m], &w[..m]) + 1e-12);
        }
    }
}
