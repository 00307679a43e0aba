//! Lower-bound construction over point masses on eventually-zero binary
//! sequences.
//!
//! `Sₙ` is the set of sequences with `xᵢ = 0` for all `i > n`, and a member
//! of the Dirac class has support length `s` if its last `1` sits at position
//! `s`. Against `ρ = Bernoulli(½)` every such member has `Lₙ(μ,ρ) = n`. For a
//! prior with mass profile
//!
//! ```text
//! Wₛ = Σ { w_μ : support length of μ < s }
//! ```
//!
//! the strings `Uₙ = Sₙ₊₁ ∖ Sₙ` (length `n+1`, ending in `1`) carry at most
//! `1 − Wₙ` of the mixture's mass, so some `x ∈ Uₙ` has
//! `ν(x) ≤ 2⁻ⁿ (1 − Wₙ)` and the point mass on `x` suffers regret
//!
//! ```text
//! L_{n+1}(μ*,ν) − L_{n+1}(μ*,ρ) = −log₂ν(x) − (n+1) ≥ −log₂(1 − Wₙ) − 1.
//! ```
//!
//! A class truncated at support length `K` makes this checkable for every
//! `n ≤ K − 1`.

use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::alphabet::{Alphabet, Symbol};
use crate::error::{Error, Result};
use crate::loss::cumulative_kl;
use crate::measure::{build_class, ClassSpec, Family, Measure, ModelClass};
use crate::prior::DiscretePrior;

// ---------------------------------------------------------------------------
// Class index
// ---------------------------------------------------------------------------

/// Support lengths of a class made only of binary point masses with tail `0`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiracClassIndex {
    /// Largest support length present in the class.
    pub k: usize,
    supports: Vec<usize>,
    prefixes: Vec<Vec<Symbol>>,
}

impl DiracClassIndex {
    pub fn from_class(class: &ModelClass) -> Result<Self> {
        if class.alphabet() != Alphabet::BINARY {
            return Err(Error::invalid("the lower-bound construction is binary only"));
        }
        let mut supports = Vec::with_capacity(class.len());
        let mut prefixes = Vec::with_capacity(class.len());
        for m in class.measures() {
            match m.as_dirac() {
                Some((prefix, 0)) => {
                    supports.push(prefix.len());
                    prefixes.push(prefix.to_vec());
                }
                _ => {
                    return Err(Error::invalid(format!(
                        "{} is not a point mass on an eventually-zero sequence",
                        m.id()
                    )))
                }
            }
        }
        let k = supports.iter().copied().max().unwrap_or(0);
        Ok(DiracClassIndex { k, supports, prefixes })
    }

    pub fn support(&self, member: usize) -> usize {
        self.supports[member]
    }

    /// Members concentrated on `Sₙ`.
    pub fn concentrated_on(&self, n: usize) -> Vec<usize> {
        (0..self.supports.len()).filter(|&m| self.supports[m] <= n).collect()
    }
}

/// `Uₙ`: the `2ⁿ` strings of length `n+1` ending in `1`, in lexicographic order.
pub fn u_set(n: usize) -> Vec<Vec<Symbol>> {
    assert!(n < 63, "U_n is enumerated explicitly");
    (0..1u64 << n).map(|r| u_string(n, r)).collect()
}

fn u_string(n: usize, rank: u64) -> Vec<Symbol> {
    let mut x: Vec<Symbol> = (0..n).map(|j| ((rank >> (n - 1 - j)) & 1) as Symbol).collect();
    x.push(1);
    x
}

/// Confirms `Lₙ(μ, Bernoulli(½)) = n` for every member and returns `n`.
pub fn minimax_loss_check(class: &ModelClass, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("n must be >= 1"));
    }
    DiracClassIndex::from_class(class)?;
    let half = Measure::bernoulli(0.5)?;
    for m in class.measures() {
        let loss = cumulative_kl(m, &half, n)?.bits();
        if (loss - n as f64).abs() > 1e-9 {
            return Err(Error::Inconsistent(format!("L_{n}({}, Bernoulli(1/2)) = {loss}", m.id())));
        }
    }
    Ok(n as f64)
}

// ---------------------------------------------------------------------------
// Mass profile
// ---------------------------------------------------------------------------

/// `Wₛ` for `s = 1..=K+1` and the members counted in each.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriorMassProfile {
    pub k: usize,
    /// `w[s-1] = Wₛ`.
    pub w: Vec<f64>,
    /// `tail[s-1] = Σ { w_μ : support length ≥ s }`, summed directly.
    pub tail: Vec<f64>,
    /// `members[s-1]`: members with support length `< s` and positive weight.
    pub members: Vec<Vec<usize>>,
}

impl PriorMassProfile {
    /// `Wₛ`, for `1 ≤ s ≤ K+1`.
    pub fn w(&self, s: usize) -> f64 {
        self.w[s - 1]
    }

    /// `1 − Wₛ`, without cancellation.
    pub fn remaining(&self, s: usize) -> f64 {
        self.tail[s - 1]
    }
}

pub fn mass_profile(prior: &DiscretePrior) -> Result<PriorMassProfile> {
    let index = DiracClassIndex::from_class(prior.class())?;
    let weights = prior.member_weights();
    let k = index.k;
    let mut w = Vec::with_capacity(k + 1);
    let mut tail = Vec::with_capacity(k + 1);
    let mut members = Vec::with_capacity(k + 1);
    for s in 1..=k + 1 {
        let (inside, outside): (Vec<usize>, Vec<usize>) =
            (0..weights.len()).filter(|&m| weights[m] > 0.0).partition(|&m| index.support(m) < s);
        w.push(inside.iter().map(|&m| weights[m]).sum());
        tail.push(outside.iter().map(|&m| weights[m]).sum());
        members.push(inside);
    }
    Ok(PriorMassProfile { k, w, tail, members })
}

// ---------------------------------------------------------------------------
// Witness search
// ---------------------------------------------------------------------------

fn serialize_bits<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_infinite() {
        s.serialize_str(if *v > 0.0 { "inf" } else { "-inf" })
    } else {
        s.serialize_f64(*v)
    }
}

/// Point mass in `Uₙ` on which the prior does worst.
#[derive(Debug, Clone, Serialize)]
pub struct Witness {
    pub n: usize,
    /// `x*`, length `n+1`.
    pub witness_prefix: String,
    #[serde(rename = "W_n")]
    pub w_n: f64,
    /// `−log₂(1 − Wₙ) − 1`.
    #[serde(serialize_with = "serialize_bits")]
    pub guarantee_bits: f64,
    /// `−log₂ν(x*) − (n+1)`.
    #[serde(serialize_with = "serialize_bits")]
    pub actual_regret_bits: f64,
    /// `ν(x*)`.
    pub nu_mass: f64,
    /// `ν(Uₙ)`.
    pub u_mass: f64,
    #[serde(skip)]
    pub measure: Measure,
}

/// `ν(x)` for every `x ∈ Uₙ`, indexed by the rank of `x₁..xₙ`.
fn u_masses(index: &DiracClassIndex, weights: &[f64], n: usize) -> Vec<f64> {
    let mut mass = vec![0.0; 1usize << n];
    for (m, &w) in weights.iter().enumerate() {
        if w <= 0.0 || index.supports[m] < n + 1 || index.prefixes[m][n] != 1 {
            continue;
        }
        let rank = index.prefixes[m][..n].iter().fold(0usize, |r, &b| (r << 1) | b as usize);
        mass[rank] += w;
    }
    mass
}

/// Scans `Uₙ` for the string of least mixture mass (lexicographically first
/// on ties) and reports the regret of the point mass on it.
pub fn adversarial_witness(prior: &DiscretePrior, n: usize) -> Result<Witness> {
    let index = DiracClassIndex::from_class(prior.class())?;
    let profile = mass_profile(prior)?;
    witness_with(&index, &profile, &prior.member_weights(), n)
}

fn witness_with(index: &DiracClassIndex, profile: &PriorMassProfile, weights: &[f64], n: usize) -> Result<Witness> {
    if n == 0 {
        return Err(Error::invalid("n must be >= 1"));
    }
    if n + 1 > index.k {
        return Err(Error::invalid(format!("n + 1 = {} exceeds the class support bound K = {}", n + 1, index.k)));
    }
    let mass = u_masses(index, weights, n);
    let (rank, nu) = mass
        .par_iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .expect("U_n is non-empty");
    let x = u_string(n, rank as u64);
    let actual = if nu > 0.0 { -nu.log2() - (n + 1) as f64 } else { f64::INFINITY };
    let remaining = profile.remaining(n);
    let guarantee = if remaining > 0.0 { -remaining.log2() - 1.0 } else { f64::INFINITY };
    Ok(Witness {
        n,
        witness_prefix: Alphabet::BINARY.render(&x),
        w_n: profile.w(n),
        guarantee_bits: guarantee,
        actual_regret_bits: actual,
        nu_mass: nu,
        u_mass: mass.iter().sum(),
        measure: Measure::dirac(Alphabet::BINARY, &x, 0)?,
    })
}

/// Witnesses for `n = 1..=k-1`.
pub fn theta_curve(prior: &DiscretePrior, k: usize) -> Result<Vec<Witness>> {
    let index = DiracClassIndex::from_class(prior.class())?;
    if k > index.k {
        return Err(Error::invalid(format!("K = {k} exceeds the class support bound {}", index.k)));
    }
    let profile = mass_profile(prior)?;
    let weights = prior.member_weights();
    (1..k).map(|n| witness_with(&index, &profile, &weights, n)).collect()
}

// ---------------------------------------------------------------------------
// Preset priors
// ---------------------------------------------------------------------------

/// Reference priors over `dirac-upto-K`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PresetPrior {
    /// Equal weight on all `2ᴷ` members.
    Uniform,
    /// Weight `∝ 2^-(s+1)` per support length `s`, split evenly within it.
    Geometric,
    /// All mass on the all-zero sequence.
    SingleDelta,
}

impl std::str::FromStr for PresetPrior {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(PresetPrior::Uniform),
            "geometric" => Ok(PresetPrior::Geometric),
            "single-delta" => Ok(PresetPrior::SingleDelta),
            other => Err(Error::invalid(format!("unknown preset prior {other:?}"))),
        }
    }
}

/// The binary `dirac-upto-K` class.
pub fn dirac_class(k: usize) -> Result<ModelClass> {
    build_class(&ClassSpec { alphabet_size: 2, description: None, family: Family::DiracUptoK { k, tail: 0 } })
}

pub fn preset_prior(preset: PresetPrior, k: usize) -> Result<DiscretePrior> {
    let class = dirac_class(k)?;
    let index = DiracClassIndex::from_class(&class)?;
    let weights: Vec<f64> = match preset {
        PresetPrior::Uniform => vec![1.0 / class.len() as f64; class.len()],
        PresetPrior::Geometric => {
            let total: f64 = (0..=k).map(|s| 0.5f64.powi(s as i32 + 1)).sum();
            (0..class.len())
                .map(|m| {
                    let s = index.support(m);
                    let count = if s == 0 { 1.0 } else { (1u64 << (s - 1)) as f64 };
                    0.5f64.powi(s as i32 + 1) / total / count
                })
                .collect()
        }
        PresetPrior::SingleDelta => (0..class.len()).map(|m| if index.support(m) == 0 { 1.0 } else { 0.0 }).collect(),
    };
    DiscretePrior::from_member_weights(class, &weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn u_sets() {
        assert_eq!(u_set(1), vec![vec![0, 1], vec![1, 1]]);
        assert_eq!(u_set(4).len(), 16);
        assert!(u_set(4).iter().all(|x| x.len() == 5 && x[4] == 1));
    }

    #[test]
    fn minimax_loss() {
        let class = dirac_class(4).unwrap();
        assert_eq!(minimax_loss_check(&class, 7).unwrap(), 7.0);
        assert_eq!(minimax_loss_check(&class, 4).unwrap(), 4.0);
        let bern = ModelClass::new(Alphabet::BINARY, "b", vec![Measure::bernoulli(0.3).unwrap()]).unwrap();
        assert!(minimax_loss_check(&bern, 3).is_err());
    }

    #[test]
    fn uniform_profile_on_three() {
        let prior = preset_prior(PresetPrior::Uniform, 3).unwrap();
        let p = mass_profile(&prior).unwrap();
        assert_eq!(p.w(4), 1.0);
        assert_eq!(p.w(1), 0.125);
        assert_eq!(p.w(2), 0.25);
        assert_eq!(p.w(3), 0.5);
        assert_eq!(p.remaining(4), 0.0);
    }

    #[test]
    fn single_delta_is_infinite_from_one() {
        let prior = preset_prior(PresetPrior::SingleDelta, 4).unwrap();
        let curve = theta_curve(&prior, 4).unwrap();
        assert_eq!(curve.len(), 3);
        for w in &curve {
            assert_eq!(w.actual_regret_bits, f64::INFINITY);
            assert_eq!(w.guarantee_bits, f64::INFINITY);
        }
        assert_eq!(curve[0].witness_prefix, "01");
        let json = serde_json::to_value(&curve[0]).unwrap();
        assert_eq!(json["actual_regret_bits"], "inf");
        assert_eq!(json["W_n"], 1.0);
    }

    #[test]
    fn witness_mass_matches_mixture_marginal() {
        let prior = preset_prior(PresetPrior::Geometric, 5).unwrap();
        let nu = prior.measure().unwrap();
        for n in 1..5 {
            let w = adversarial_witness(&prior, n).unwrap();
            let x = Alphabet::BINARY.parse(&w.witness_prefix).unwrap();
            let direct = nu.marginal(&x).unwrap().prob();
            assert!((direct - w.nu_mass).abs() < 1e-15);
            let u_total: f64 = u_set(n).iter().map(|x| nu.marginal(x).unwrap().prob()).sum();
            assert!((u_total - w.u_mass).abs() < 1e-12);
        }
    }

    #[test]
    fn witness_rejects_long_horizon() {
        let prior = preset_prior(PresetPrior::Uniform, 3).unwrap();
        assert!(adversarial_witness(&prior, 2).is_ok());
        assert!(adversarial_witness(&prior, 3).is_err());
        assert!(theta_curve(&prior, 4).is_err());
    }

    #[test]
    fn geometric_weights_sum_to_one() {
        let prior = preset_prior(PresetPrior::Geometric, 6).unwrap();
        assert!((prior.total_weight() - 1.0).abs() < 1e-12);
        let p = mass_profile(&prior).unwrap();
        assert!(p.w.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn parses_presets() {
        assert_eq!("single-delta".parse::<PresetPrior>().unwrap(), PresetPrior::SingleDelta);
        assert!("other".parse::<PresetPrior>().is_err());
    }
}
