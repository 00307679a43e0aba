use serde::Serialize;

use crate::error::{Error, Result};

/// Relative tolerance used when a value sits on an interval boundary.
pub const BOUNDARY_TOLERANCE: f64 = 1e-12;

/// Partition of `[-log₂n / n, M + 1/n]` into `k` intervals: `[0, M]` split
/// evenly, with the leftmost interval padded down to `-log₂n / n` and the
/// rightmost padded up to `M + 1/n`.
///
/// ```text
/// u¹ = [-log₂n/n, M/k]
/// uⁱ = ((i-1)M/k, iM/k]       1 < i < k
/// uᵏ = ((k-1)M/k, M + 1/n]
/// ```
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalPartition {
    pub n: usize,
    pub k: usize,
    pub bits: f64,
}

impl IntervalPartition {
    pub fn lower(&self) -> f64 {
        -(self.n as f64).log2() / self.n as f64
    }

    pub fn upper(&self) -> f64 {
        self.bits + 1.0 / self.n as f64
    }

    /// Bounds of interval `i` (1-based) as `(lo, hi)`. Only the first interval
    /// is closed on the left.
    pub fn interval(&self, i: usize) -> (f64, f64) {
        assert!((1..=self.k).contains(&i), "interval index out of range");
        let step = self.bits / self.k as f64;
        let lo = if i == 1 { self.lower() } else { (i - 1) as f64 * step };
        let hi = if i == self.k { self.upper() } else { i as f64 * step };
        (lo, hi)
    }

    /// The 1-based interval containing `r`, or `None` outside the covered range.
    /// Values within the tolerance of an interior boundary `jM/k` count as
    /// equal to it and therefore land in interval `j`.
    pub fn locate(&self, r: f64) -> Option<usize> {
        let tol = |v: f64| BOUNDARY_TOLERANCE * v.abs().max(1.0);
        if r.is_nan() || r < self.lower() - tol(self.lower()) || r > self.upper() + tol(self.upper()) {
            return None;
        }
        let mut t = r * self.k as f64 / self.bits;
        let nearest = t.round();
        if (t - nearest).abs() <= tol(t) {
            t = nearest;
        }
        Some((t.ceil().max(1.0) as usize).min(self.k))
    }
}

/// Builds the partition for horizon `n` into `k` intervals, `M = bits`.
pub fn partition_thresholds(n: usize, k: usize, bits: f64) -> Result<IntervalPartition> {
    if n < 2 {
        return Err(Error::invalid("the interval partition needs n >= 2"));
    }
    if k < 2 {
        return Err(Error::invalid("the interval partition needs k >= 2"));
    }
    if !(bits > 0.0 && bits.is_finite()) {
        return Err(Error::invalid("M must be positive"));
    }
    Ok(IntervalPartition { n, k, bits })
}

/// Number of intervals used at horizon `n`: `⌈n / log₂log₂n⌉`, and 2 for `n <= 2`.
pub fn intervals_for(n: usize) -> usize {
    if n <= 2 {
        return 2;
    }
    let nf = n as f64;
    ((nf / nf.log2().log2()).ceil() as usize).max(2)
}
