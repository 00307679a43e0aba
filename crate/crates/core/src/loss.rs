//! Expected cumulative log-loss regret `Lₙ(μ, ρ)` in bits.
//!
//! ```text
//! Lₙ(μ, ρ) = Σ_{x ∈ Xⁿ} μ(x) log₂ (μ(x) / ρ(x))
//! ```
//!
//! with `0 · log 0 = 0` and `μ(x) > 0 = ρ(x)` giving `+∞`. By the chain rule
//! this is the μ-expected sum of per-step KL divergences between the two
//! predictors' next-symbol conditionals.

use std::collections::BTreeSet;
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::alphabet::Symbol;
use crate::enumerate::{Evaluator, DEFAULT_BUDGET};
use crate::error::{Error, Result};
use crate::logprob::log2_sum_exp;
use crate::measure::Measure;
use crate::prior::DiscretePrior;

/// A loss in bits: non-negative, possibly `+∞`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LossValue(f64);

impl LossValue {
    pub const INFINITE: LossValue = LossValue(f64::INFINITY);

    /// Rounding noise below zero is clamped; anything more negative is kept
    /// so that a genuine sign error stays visible.
    pub fn from_bits(bits: f64) -> Self {
        if bits < 0.0 && bits > -1e-9 {
            LossValue(0.0)
        } else {
            LossValue(bits)
        }
    }

    pub fn bits(self) -> f64 {
        self.0
    }

    pub fn is_infinite(self) -> bool {
        self.0 == f64::INFINITY
    }
}

impl fmt::Display for LossValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_bits(self.0, f)
    }
}

pub(crate) fn fmt_bits(v: f64, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if v == f64::INFINITY {
        write!(f, "inf")
    } else if v == f64::NEG_INFINITY {
        write!(f, "-inf")
    } else {
        write!(f, "{v}")
    }
}

/// Contribution `μ(x) log₂(μ(x)/ρ(x))` of one string, from log₂ values.
#[inline]
pub fn kl_term(log_mu: f64, log_rho: f64) -> f64 {
    if log_mu == f64::NEG_INFINITY {
        0.0
    } else if log_rho == f64::NEG_INFINITY {
        f64::INFINITY
    } else {
        log_mu.exp2() * (log_mu - log_rho)
    }
}

fn check_horizon(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("horizon must be at least 1"));
    }
    Ok(())
}

/// Exact `Lₙ(μ, ρ)` by enumeration, within the default budget.
pub fn cumulative_kl(mu: &Measure, rho: &Measure, n: usize) -> Result<LossValue> {
    cumulative_kl_with_budget(mu, rho, n, DEFAULT_BUDGET)
}

pub fn cumulative_kl_with_budget(mu: &Measure, rho: &Measure, n: usize, budget: u64) -> Result<LossValue> {
    check_horizon(n)?;
    // A point mass has one string of positive probability.
    if let Some((prefix, tail)) = mu.as_dirac() {
        let x: Vec<Symbol> = (0..n).map(|t| prefix.get(t).copied().unwrap_or(tail)).collect();
        let log_rho = rho.marginal(&x)?.log2();
        return Ok(LossValue::from_bits(kl_term(0.0, log_rho)));
    }
    let ev = Evaluator::new(&[mu, rho])?;
    let total = ev.fold(n, budget, || 0.0, |acc, _, logs| *acc += kl_term(logs[0], logs[1]), |a, b| a + b)?;
    Ok(LossValue::from_bits(total))
}

/// `Lₙ|_A(μ, ρ)`: the same sum restricted to the strings in `A`. May be negative.
pub fn restricted_kl(mu: &Measure, rho: &Measure, n: usize, set: &[Vec<Symbol>]) -> Result<f64> {
    let mut unique = BTreeSet::new();
    for x in set {
        if x.len() != n {
            return Err(Error::invalid(format!("string of length {} in a set of length-{n} strings", x.len())));
        }
        mu.alphabet().check(x)?;
        unique.insert(x.as_slice());
    }
    let mut total = 0.0;
    for x in unique {
        total += kl_term(mu.marginal(x)?.log2(), rho.marginal(x)?.log2());
    }
    Ok(total)
}

/// Monte Carlo estimate of `Lₙ(μ, ρ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub sample_count: usize,
    pub seed: u64,
    /// Set when some sampled string had `ρ(x) = 0`; `mean` is then `+∞`.
    pub infinite: bool,
}

/// Averages `log₂(μ(x)/ρ(x))` over `samples` draws `x ~ μ`.
pub fn mc_loss(mu: &Measure, rho: &Measure, n: usize, samples: usize, seed: u64) -> Result<McEstimate> {
    check_horizon(n)?;
    if samples < 2 {
        return Err(Error::invalid("at least two samples are needed"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mean = 0.0;
    let mut m2 = 0.0;
    let mut infinite = false;
    for count in 1..=samples {
        let x = mu.sample_with(&mut rng, n);
        let log_rho = rho.marginal(&x)?.log2();
        if log_rho == f64::NEG_INFINITY {
            infinite = true;
            continue;
        }
        let ratio = mu.marginal(&x)?.log2() - log_rho;
        // Welford
        let delta = ratio - mean;
        mean += delta / count as f64;
        m2 += delta * (ratio - mean);
    }
    if infinite {
        return Ok(McEstimate { mean: f64::INFINITY, std_error: f64::INFINITY, sample_count: samples, seed, infinite });
    }
    let variance = m2 / (samples - 1) as f64;
    Ok(McEstimate { mean, std_error: (variance / samples as f64).sqrt(), sample_count: samples, seed, infinite })
}

/// Next-symbol distribution `P(xₜ = a | prefix)` for every `a`.
pub fn predictive(measure: &Measure, prefix: &[Symbol]) -> Result<Vec<f64>> {
    measure.alphabet().check(prefix)?;
    let atoms = measure.atoms();
    let base: Vec<f64> = atoms.iter().map(|(w, m)| Ok(w.log2() + m.marginal(prefix)?.log2())).collect::<Result<_>>()?;
    let total = log2_sum_exp(base.iter().copied());
    if total == f64::NEG_INFINITY {
        return Err(Error::UndefinedConditional);
    }
    let size = measure.alphabet().size();
    let mut out: Vec<f64> = (0..size as Symbol)
        .map(|a| {
            let joint = log2_sum_exp(atoms.iter().zip(&base).map(|((_, m), &b)| {
                if b == f64::NEG_INFINITY {
                    b
                } else {
                    b + m.step(prefix, a)
                }
            }));
            (joint - total).exp2()
        })
        .collect();
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= sum);
    Ok(out)
}

/// Bayes posterior predictive of the mixture `ν = Σ wᵢ μᵢ` after `prefix`.
pub fn predict_next(prior: &DiscretePrior, prefix: &[Symbol]) -> Result<Vec<f64>> {
    predictive(prior.measure()?, prefix)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alphabet::Alphabet;

    #[test]
    fn identical_measures_have_zero_loss() {
        let m = Measure::markov1(0.3, 0.6).unwrap();
        for n in 1..8 {
            assert_eq!(cumulative_kl(&m, &m, n).unwrap().bits(), 0.0);
        }
    }

    #[test]
    fn dirac_against_fair_coin_costs_one_bit_per_symbol() {
        let d = Measure::dirac(Alphabet::BINARY, &[1, 0, 1], 0).unwrap();
        let half = Measure::bernoulli(0.5).unwrap();
        for n in 1..=12 {
            assert_eq!(cumulative_kl(&d, &half, n).unwrap().bits(), n as f64);
        }
    }

    #[test]
    fn bernoulli_pair_matches_closed_form() {
        let mu = Measure::bernoulli(0.7).unwrap();
        let rho = Measure::bernoulli(0.5).unwrap();
        let got = cumulative_kl(&mu, &rho, 4).unwrap().bits();
        let per_step = 0.7 * 1.4f64.log2() + 0.3 * 0.6f64.log2();
        assert!((got - 4.0 * per_step).abs() < 1e-12);
        assert!((got - 0.4748).abs() < 5e-5);
    }

    #[test]
    fn zero_reference_mass_is_infinite() {
        let mu = Measure::bernoulli(0.5).unwrap();
        let rho = Measure::dirac(Alphabet::BINARY, &[], 0).unwrap();
        assert!(cumulative_kl(&mu, &rho, 3).unwrap().is_infinite());
    }

    #[test]
    fn zero_horizon_rejected() {
        let mu = Measure::bernoulli(0.5).unwrap();
        assert!(cumulative_kl(&mu, &mu, 0).is_err());
    }

    #[test]
    fn restricted_edge_cases() {
        let mu = Measure::bernoulli(0.7).unwrap();
        let rho = Measure::bernoulli(0.4).unwrap();
        assert_eq!(restricted_kl(&mu, &rho, 3, &[]).unwrap(), 0.0);
        let all: Vec<_> = (0..8).map(|i| Alphabet::BINARY.string_at(i, 3)).collect();
        let full = restricted_kl(&mu, &rho, 3, &all).unwrap();
        assert!((full - cumulative_kl(&mu, &rho, 3).unwrap().bits()).abs() < 1e-12);
        assert!(restricted_kl(&mu, &rho, 3, &[vec![0, 1]]).is_err());
    }

    #[test]
    fn mc_degenerate_case_is_exact() {
        let d = Measure::dirac(Alphabet::BINARY, &[], 0).unwrap();
        let half = Measure::bernoulli(0.5).unwrap();
        let est = mc_loss(&d, &half, 20, 100, 3).unwrap();
        assert_eq!(est.mean, 20.0);
        assert_eq!(est.std_error, 0.0);
        assert!(mc_loss(&d, &half, 20, 1, 3).is_err());
    }

    #[test]
    fn mc_flags_infinite_loss() {
        let mu = Measure::bernoulli(0.5).unwrap();
        let rho = Measure::dirac(Alphabet::BINARY, &[], 0).unwrap();
        let est = mc_loss(&mu, &rho, 4, 50, 0).unwrap();
        assert!(est.infinite);
        assert_eq!(est.mean, f64::INFINITY);
    }

    #[test]
    fn predictive_of_single_measure_is_its_conditional() {
        let m = Measure::markov1(0.2, 0.7).unwrap();
        let p = predictive(&m, &[1, 0]).unwrap();
        assert!((p[1] - 0.2).abs() < 1e-15);
        assert!((p[0] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn predictive_collapses_on_evidence() {
        let a = Measure::dirac(Alphabet::BINARY, &[], 0).unwrap();
        let b = Measure::dirac(Alphabet::BINARY, &[1], 0).unwrap();
        let mix = Measure::mixture(vec![(0.5, a), (0.5, b)]).unwrap();
        assert_eq!(predictive(&mix, &[]).unwrap(), vec![0.5, 0.5]);
        assert_eq!(predictive(&mix, &[1]).unwrap(), vec![1.0, 0.0]);
        assert_eq!(predictive(&mix, &[1, 1]), Err(Error::UndefinedConditional));
    }
}
