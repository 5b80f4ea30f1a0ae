//! Economic dispatch over a price/demand series.
//!
//! Generator `i` at step `t`:
//! `f = a_i x² + b_i x + c_i − P_t x`, `g = s_i D_t − x`, `Ω_i = [lower_i, upper_i]`,
//! so `Σ_i g_i = D_t − Σ_i x_i`. Step `t` uses the realized `P_t`, `D_t`.

use serde::{Deserialize, Serialize};

use super::market::MarketSeries;
use super::Scenario;
use crate::error::{Error, Result};
use crate::problem::{FeasibleSet, IsoQuadratic, NodeProblem, QuadraticScalarCost, StepFunctions};

pub const DEFAULT_A: [f64; 5] = [0.040, 0.050, 0.035, 0.045, 0.038];
pub const DEFAULT_B: [f64; 5] = [-0.120, -0.150, -0.105, -0.135, -0.114];
pub const DEFAULT_C: [f64; 5] = [100.0, 110.0, 95.0, 105.0, 98.0];

const SHARE_TOL: f64 = 1e-12;

pub fn default_coefficients() -> Vec<QuadraticScalarCost> {
    DEFAULT_A
        .iter()
        .zip(DEFAULT_B)
        .zip(DEFAULT_C)
        .map(|((&a, b), c)| QuadraticScalarCost { a, b, c })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchScenario {
    pub coefficients: Vec<QuadraticScalarCost>,
    pub price: Vec<f64>,
    pub demand: Vec<f64>,
    pub shares: Vec<f64>,
    /// Output range per generator.
    pub ranges: Vec<(f64, f64)>,
    pub region: String,
}

/// Assembles a dispatch instance.
///
/// `shares` defaults to uniform. `ranges` defaults to `[0, 2·max_t D_t / N]`
/// for every generator.
pub fn build_dispatch(
    series: &MarketSeries,
    coefficients: Vec<QuadraticScalarCost>,
    shares: Option<Vec<f64>>,
    ranges: Option<Vec<(f64, f64)>>,
) -> Result<DispatchScenario> {
    let n = coefficients.len();
    if n == 0 {
        return Err(Error::Contract("dispatch needs at least one generator".into()));
    }
    if series.is_empty() {
        return Err(Error::Contract("dispatch needs a non-empty market series".into()));
    }
    for (i, c) in coefficients.iter().enumerate() {
        if !(c.a > 0.0 && c.a.is_finite() && c.b.is_finite() && c.c.is_finite()) {
            return Err(Error::Contract(format!(
                "generator {i}: need finite coefficients with a > 0, got a={}, b={}, c={}",
                c.a, c.b, c.c
            )));
        }
    }
    let shares = shares.unwrap_or_else(|| vec![1.0 / n as f64; n]);
    if shares.len() != n {
        return Err(Error::Contract(format!("{} shares for {n} generators", shares.len())));
    }
    if shares.iter().any(|s| s.is_nan() || *s < 0.0) || (shares.iter().sum::<f64>() - 1.0).abs() > SHARE_TOL {
        return Err(Error::Contract(format!(
            "shares must be nonnegative and sum to 1, got {shares:?}"
        )));
    }
    let ranges = match ranges {
        Some(r) => r,
        None => vec![(0.0, 2.0 * series.max_demand().max(0.0) / n as f64); n],
    };
    if ranges.len() != n {
        return Err(Error::Contract(format!("{} output ranges for {n} generators", ranges.len())));
    }
    for (i, (lo, hi)) in ranges.iter().enumerate() {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::Contract(format!("generator {i}: invalid output range [{lo}, {hi}]")));
        }
    }
    Ok(DispatchScenario {
        coefficients,
        price: series.price.clone(),
        demand: series.demand.clone(),
        shares,
        ranges,
        region: series.region.clone(),
    })
}

impl DispatchScenario {
    pub fn nodes(&self) -> usize {
        self.coefficients.len()
    }

    pub fn len(&self) -> usize {
        self.price.len()
    }

    pub fn is_empty(&self) -> bool {
        self.price.is_empty()
    }

    /// Node problems for the first `horizon` steps.
    pub fn problems(&self, horizon: usize) -> Result<Vec<NodeProblem>> {
        if horizon == 0 || horizon > self.len() {
            return Err(Error::OutOfRange {
                what: "dispatch horizon",
                value: horizon.to_string(),
                range: format!("[1, {}]", self.len()),
            });
        }
        self.coefficients
            .iter()
            .enumerate()
            .map(|(i, cost)| {
                let (lo, hi) = self.ranges[i];
                let steps = (0..horizon)
                    .map(|k| StepFunctions {
                        objective: cost.at_price(self.price[k]),
                        constraints: vec![IsoQuadratic::affine(vec![-1.0], self.shares[i] * self.demand[k])],
                    })
                    .collect();
                NodeProblem::new(i, FeasibleSet::boxed(vec![lo], vec![hi])?, steps)
            })
            .collect()
    }

    pub fn scenario(&self, horizon: usize) -> Result<Scenario> {
        Ok(Scenario {
            id: format!("dispatch-{}", self.region),
            problems: self.problems(horizon)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::market::synthetic_market;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    fn flat_series(demand: f64, price: f64, len: usize) -> MarketSeries {
        let mut s = synthetic_market(len, 5, 0, "TEST");
        s.demand = vec![demand; len];
        s.price = vec![price; len];
        s
    }

    #[test]
    fn node_function_values() {
        let s = flat_series(100.0, 1.0, 3);
        let d = build_dispatch(&s, default_coefficients(), None, None).unwrap();
        let p = d.problems(3).unwrap();
        let e = p[0].eval(1, &[0.0]).unwrap();
        assert_relative_eq!(e.f, 100.0);
        assert_relative_eq!(e.grad_f[0], -1.12, epsilon = 1e-15);
        // uniform shares, D = 100 → g = 20 − x
        assert_relative_eq!(p[2].constraint(2, &[7.0]).unwrap()[0], 13.0);
        assert_eq!(p[0].feasible_set().bounding_box().1, vec![40.0]);
    }

    #[test]
    fn aggregate_identity() {
        let series = synthetic_market(50, 5, 3, "NSW");
        let d = build_dispatch(&series, default_coefficients(), Some(vec![0.1, 0.3, 0.2, 0.25, 0.15]), None).unwrap();
        let p = d.problems(50).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..1000 {
            let t = rng.gen_range(1..=50);
            let x: Vec<f64> = (0..5).map(|_| rng.gen_range(0.0..4000.0)).collect();
            let sum_g: f64 = p.iter().zip(&x).map(|(pi, xi)| pi.constraint(t, &[*xi]).unwrap()[0]).sum();
            let rhs = d.demand[t - 1] - x.iter().sum::<f64>();
            assert!((sum_g - rhs).abs() <= 1e-12 * d.demand[t - 1].max(1.0), "{sum_g} vs {rhs}");
        }
    }

    #[test]
    fn contract_violations() {
        let s = flat_series(100.0, 1.0, 3);
        assert!(matches!(
            build_dispatch(&s, default_coefficients(), Some(vec![0.5, 0.5]), None),
            Err(Error::Contract(_))
        ));
        assert!(matches!(
            build_dispatch(&s, default_coefficients(), Some(vec![0.5, 0.5, 0.0, 0.0, 0.1]), None),
            Err(Error::Contract(_))
        ));
        assert!(matches!(
            build_dispatch(&s, default_coefficients(), None, Some(vec![(0.0, 1.0)])),
            Err(Error::Contract(_))
        ));
        let d = build_dispatch(&s, default_coefficients(), None, None).unwrap();
        assert!(d.problems(4).is_err());
    }
}
