//! Brute-force reference computations shared by the integration tests.
//! Nothing here goes through the enumeration engine or the prior builder.

#![allow(dead_code)]

use mixpred_core::{Measure, Symbol};

/// Every string of length `n` over `0..size`, in lexicographic order.
pub fn all_strings(size: usize, n: usize) -> Vec<Vec<Symbol>> {
    let mut out = Vec::new();
    let mut x = vec![0 as Symbol; n];
    loop {
        out.push(x.clone());
        let mut pos = n;
        loop {
            if pos == 0 {
                return out;
            }
            pos -= 1;
            if (x[pos] as usize) + 1 < size {
                x[pos] += 1;
                break;
            }
            x[pos] = 0;
        }
    }
}

/// Probability of `x` as the product of next-symbol conditionals.
pub fn chain_prob(m: &Measure, x: &[Symbol]) -> f64 {
    let mut p = 1.0;
    for t in 0..x.len() {
        if p == 0.0 {
            return 0.0;
        }
        p *= m.conditional(&x[..t], x[t]).unwrap().prob();
    }
    p
}

pub fn bernoulli_prob(p: f64, x: &[Symbol]) -> f64 {
    x.iter().map(|&b| if b == 1 { p } else { 1.0 - p }).product()
}

/// Cumulative KL as the `μ`-expected sum of per-step divergences between
/// next-symbol conditionals, by depth-first recursion over prefixes.
pub fn kl_by_steps(mu: &Measure, rho: &Measure, n: usize) -> f64 {
    fn go(mu: &Measure, rho: &Measure, prefix: &mut Vec<Symbol>, weight: f64, left: usize) -> f64 {
        if left == 0 || weight == 0.0 {
            return 0.0;
        }
        let size = mu.alphabet().size();
        let mut total = 0.0;
        for a in 0..size {
            let a = a as Symbol;
            let pm = mu.conditional(prefix, a).unwrap().prob();
            if pm == 0.0 {
                continue;
            }
            let pr = rho.conditional(prefix, a).map(|l| l.prob()).unwrap_or(0.0);
            if pr == 0.0 {
                return f64::INFINITY;
            }
            total += weight * pm * (pm / pr).log2();
            prefix.push(a);
            total += go(mu, rho, prefix, weight * pm, left - 1);
            prefix.pop();
        }
        total
    }
    go(mu, rho, &mut Vec::new(), 1.0, n)
}

/// `w` with `Σ_{k≥2} w/(k log₂²k) = 1/2`: direct sum up to 2·10⁶ and a
/// midpoint-rule integral for the rest.
pub fn normalizer() -> f64 {
    const CUT: u64 = 2_000_000;
    let mut terms: Vec<f64> = (2..=CUT)
        .map(|k| {
            let l = (k as f64).log2();
            1.0 / (k as f64 * l * l)
        })
        .collect();
    terms.reverse();
    let direct: f64 = terms.iter().sum();
    let ln2 = std::f64::consts::LN_2;
    let tail = ln2 * ln2 / (CUT as f64 + 0.5).ln();
    0.5 / (direct + tail)
}

pub fn weight(w: f64, k: u64) -> f64 {
    if k == 1 {
        0.5
    } else {
        let l = (k as f64).log2();
        w / (k as f64 * l * l)
    }
}

/// `⌈n / log₂log₂n⌉`, with 2 for `n ≤ 2`.
pub fn intervals(n: usize) -> usize {
    if n <= 2 {
        2
    } else {
        ((n as f64) / (n as f64).log2().log2()).ceil() as usize
    }
}

/// `w³ / (4 (M+1)² n⁵ k³ log₂²n log₂²k)` evaluated directly.
pub fn b_n(w: f64, n: usize, bits: f64) -> f64 {
    let k = intervals(n) as f64;
    let n = n as f64;
    w.powi(3) / (4.0 * (bits + 1.0).powi(2) * n.powi(5) * k.powi(3) * n.log2().powi(2) * k.log2().powi(2))
}

pub fn rhs(w: f64, n: usize, bits: f64) -> f64 {
    let k = intervals(n) as f64;
    let nf = n as f64;
    bits * nf / k - b_n(w, n, bits).log2() + 4.0 * bits - 2.0 / nf * (weight(w, n as u64).log2() - 1.0) + 0.5
}
