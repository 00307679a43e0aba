//! Base-2 log-domain probabilities.
//!
//! Every probability in the crate is carried as `log₂ p`, with `-inf`
//! standing for probability zero. Losses are therefore in bits.

use std::fmt;

use serde::{Deserialize, Serialize};

/// A probability stored as its base-2 logarithm. Always `<= 0`; `-inf` is zero.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LogProb(f64);

impl LogProb {
    pub const ZERO: LogProb = LogProb(f64::NEG_INFINITY);
    pub const ONE: LogProb = LogProb(0.0);

    /// Wraps a log₂ value. Rounding noise just above zero is clamped to zero.
    pub fn from_log2(value: f64) -> Self {
        debug_assert!(!value.is_nan(), "NaN log-probability");
        debug_assert!(value <= 1e-9, "log-probability {value} above zero");
        LogProb(value.min(0.0))
    }

    pub fn from_prob(p: f64) -> Self {
        Self::from_log2(p.log2())
    }

    pub fn log2(self) -> f64 {
        self.0
    }

    pub fn prob(self) -> f64 {
        self.0.exp2()
    }

    pub fn is_zero(self) -> bool {
        self.0 == f64::NEG_INFINITY
    }
}

impl fmt::Display for LogProb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            write!(f, "-inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

/// `log₂(2^a + 2^b)` with `-inf` as the additive identity.
pub fn log2_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp2().ln_1p() / std::f64::consts::LN_2
}

/// `log₂ Σ 2^vᵢ`; the empty sum and all-`-inf` inputs give `-inf`.
pub fn log2_sum_exp(values: impl IntoIterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    if max == f64::INFINITY {
        return max;
    }
    let total: f64 = values.into_iter().map(|v| (v - max).exp2()).sum();
    max + total.log2()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_and_one() {
        assert!(LogProb::ZERO.is_zero());
        assert_eq!(LogProb::ZERO.prob(), 0.0);
        assert_eq!(LogProb::ONE.prob(), 1.0);
        assert_eq!(LogProb::from_prob(0.0), LogProb::ZERO);
    }

    #[test]
    fn clamps_rounding_above_zero() {
        assert_eq!(LogProb::from_log2(1e-15).log2(), 0.0);
    }

    #[test]
    fn sum_exp_matches_direct() {
        let v = [-1.0, -2.0, -3.0];
        let direct = (0.5f64 + 0.25 + 0.125).log2();
        assert!((log2_sum_exp(v) - direct).abs() < 1e-15);
        assert_eq!(log2_sum_exp([f64::NEG_INFINITY; 3]), f64::NEG_INFINITY);
        assert_eq!(log2_sum_exp(Vec::<f64>::new()), f64::NEG_INFINITY);
        assert!((log2_add(-1.0, -1.0) - 0.0).abs() < 1e-15);
        assert_eq!(log2_add(f64::NEG_INFINITY, -3.0), -3.0);
    }
}
