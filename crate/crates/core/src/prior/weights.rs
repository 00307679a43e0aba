//! The weight sequence `w₁ = 1/2`, `wₖ = w / (k log₂² k)` for `k > 1`.
//!
//! The normalizer `w` makes the infinite series sum to one. It is computed
//! once: the terms `k = 2..=10⁷` are summed with compensation and the
//! remainder is taken from the Euler-Maclaurin expansion around the integral
//! `∫ dk / (k log₂² k) = ln²2 / ln k`.

use std::f64::consts::LN_2;
use std::sync::OnceLock;

const DIRECT_TERMS: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightScheme {
    normalizer: f64,
}

fn term(k: f64) -> f64 {
    let l = k.log2();
    1.0 / (k * l * l)
}

/// `Σ_{k > cutoff} 1/(k log₂² k)` from the first Euler-Maclaurin terms.
pub(crate) fn tail_after(cutoff: f64) -> f64 {
    let ln = cutoff.ln();
    let integral = LN_2 * LN_2 / ln;
    let derivative = -LN_2 * LN_2 * (ln + 2.0) / (cutoff * cutoff * ln * ln * ln);
    integral - term(cutoff) / 2.0 - derivative / 12.0
}

fn compute_normalizer() -> f64 {
    // Neumaier summation, smallest terms first.
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for k in (2..=DIRECT_TERMS).rev() {
        let v = term(k as f64);
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    let series = sum + comp + tail_after(DIRECT_TERMS as f64);
    0.5 / series
}

impl WeightScheme {
    /// The process-wide scheme (normalizer computed on first use).
    pub fn standard() -> WeightScheme {
        static NORMALIZER: OnceLock<f64> = OnceLock::new();
        WeightScheme { normalizer: *NORMALIZER.get_or_init(compute_normalizer) }
    }

    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    /// `w_k` for `k >= 1`.
    pub fn weight(&self, k: u64) -> f64 {
        assert!(k >= 1, "weights are indexed from 1");
        if k == 1 {
            0.5
        } else {
            self.normalizer * term(k as f64)
        }
    }

    /// `log₂ w_k` for a real index `k >= 1`; usable far beyond `u64`.
    pub fn log2_weight(&self, k: f64) -> f64 {
        if k <= 1.0 {
            -1.0
        } else {
            let l = k.log2();
            self.normalizer.log2() - l - 2.0 * l.log2()
        }
    }

    /// `w_1, .., w_{k_max}`.
    pub fn prefix(&self, k_max: u64) -> Vec<f64> {
        (1..=k_max).map(|k| self.weight(k)).collect()
    }
}

/// `w_1 ..= w_{k_max}` under the standard normalizer.
pub fn weights(k_max: u64) -> Vec<f64> {
    WeightScheme::standard().prefix(k_max)
}
