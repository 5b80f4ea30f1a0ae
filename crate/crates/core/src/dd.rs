//! Double-double arithmetic for the tracking recursion.
//!
//! A value is an unevaluated sum `hi + lo` with `|lo| ≤ ulp(hi)/2`, giving
//! about 106 bits of significand. Only the handful of operations the engine
//! needs are provided.

use std::ops::Neg;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub(crate) struct Dd {
    pub hi: f64,
    pub lo: f64,
}

/// Error-free `a + b = s + e`.
#[inline]
pub(crate) fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

/// Error-free `a · b = p + e`.
#[inline]
pub(crate) fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub fn new(hi: f64, lo: f64) -> Self {
        let (hi, lo) = two_sum(hi, lo);
        Self { hi, lo }
    }

    pub fn from_f64(v: f64) -> Self {
        Self { hi: v, lo: 0.0 }
    }

    /// Exact `a − b` of two doubles.
    pub fn diff(a: f64, b: f64) -> Self {
        let (hi, lo) = two_sum(a, -b);
        Self { hi, lo }
    }

    pub fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Dd { hi, lo }
    }

    pub fn sub(self, o: Dd) -> Dd {
        self.add(-o)
    }

    pub fn scale(self, k: f64) -> Dd {
        let (p, e) = two_prod(self.hi, k);
        let (hi, lo) = quick_two_sum(p, e + self.lo * k);
        Dd { hi, lo }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

/// `Σ v` rounded once.
pub(crate) fn sum<I: IntoIterator<Item = f64>>(vs: I) -> f64 {
    vs.into_iter()
        .fold(Dd::default(), |acc, v| acc.add(Dd::from_f64(v)))
        .to_f64()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cancellation_is_exact() {
        let big = 1.0e16;
        let s = Dd::from_f64(big).add(Dd::from_f64(1.0)).add(Dd::from_f64(-big));
        assert_eq!(s.to_f64(), 1.0);
        assert_eq!(sum([1e16, 1.0, -1e16, 1.0]), 2.0);
        assert_eq!(sum([0.1; 10]), 1.0);
    }

    #[test]
    fn antisymmetric() {
        let a = Dd::new(3.0, 1e-17);
        let b = Dd::new(1.0 / 3.0, -1e-18);
        assert_eq!(a.sub(b).scale(0.3), -(b.sub(a).scale(0.3)));
        assert_eq!(Dd::diff(2.5, 1e-20), -Dd::diff(1e-20, 2.5));
    }

    #[test]
    fn scale_keeps_low_bits() {
        let (p, e) = two_prod(1.0 + f64::EPSILON, 1.0 + f64::EPSILON);
        assert_eq!(p, 1.0 + 2.0 * f64::EPSILON);
        assert_eq!(e, f64::EPSILON * f64::EPSILON);
    }
}
