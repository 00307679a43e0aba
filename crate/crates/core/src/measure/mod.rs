//! Process measures over a finite alphabet.
//!
//! A [`Measure`] is a probability measure on one-way infinite sequences,
//! exposed through its finite-horizon marginals `P(x₁..xₙ)` and next-symbol
//! conditionals. Concrete families are i.i.d., finite-order Markov,
//! piecewise-i.i.d. change-point processes, Dirac point masses on
//! eventually-constant sequences, and finite mixtures of these.
//!
//! Measures are immutable and `Send + Sync`; sampling takes an explicit seed.

mod class;

pub use class::{build_class, ClassSpec, Family, ModelClass, ParamGrid};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::alphabet::{Alphabet, Symbol};
use crate::error::{Error, Result};
use crate::logprob::{log2_sum_exp, LogProb};

const SUM_TOLERANCE: f64 = 1e-9;

// ---------------------------------------------------------------------------
// Serialized description
// ---------------------------------------------------------------------------

/// JSON description of a single measure. The alphabet comes from the context
/// (the enclosing class or experiment).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeasureSpec {
    /// Binary i.i.d. with `P(1) = p`.
    Bernoulli { p: f64 },
    /// i.i.d. with the given symbol probabilities.
    Iid { probs: Vec<f64> },
    /// i.i.d. with equal probabilities.
    Uniform,
    /// Order-`order` Markov chain. `probs[c]` is the next-symbol distribution
    /// after context `c` (lexicographic rank of the last `order` symbols,
    /// oldest first). Missing history is read as symbol 0.
    Markov { order: usize, probs: Vec<Vec<f64>> },
    /// Independent segments; `start` is the 1-based time of a segment's first symbol.
    ChangePoint { segments: Vec<Segment> },
    /// Point mass on `prefix` followed by `tail` forever.
    Dirac {
        prefix: String,
        #[serde(default)]
        tail: Symbol,
    },
    /// Finite convex combination.
    Mixture { components: Vec<Component> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: usize,
    pub probs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub weight: f64,
    pub measure: MeasureSpec,
}

// ---------------------------------------------------------------------------
// Compiled measure
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
enum Kernel {
    Iid {
        log2p: Vec<f64>,
    },
    Markov {
        order: usize,
        /// `log2p[ctx * size + a]`
        log2p: Vec<f64>,
    },
    ChangePoint {
        /// 0-based positions at which each segment begins; `starts[0] == 0`.
        starts: Vec<usize>,
        log2p: Vec<Vec<f64>>,
    },
    Dirac {
        prefix: Vec<Symbol>,
        tail: Symbol,
    },
    Mixture {
        components: Vec<(f64, Measure)>,
    },
}

/// An immutable process measure.
#[derive(Debug, Clone)]
pub struct Measure {
    alphabet: Alphabet,
    id: String,
    spec: MeasureSpec,
    kernel: Kernel,
}

fn check_distribution(probs: &[f64], alphabet: Alphabet, what: &str) -> Result<Vec<f64>> {
    if probs.len() != alphabet.size() {
        return Err(Error::invalid(format!("{what}: expected {} probabilities, got {}", alphabet.size(), probs.len())));
    }
    if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::invalid(format!("{what}: probabilities must lie in [0, 1]")));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > SUM_TOLERANCE {
        return Err(Error::invalid(format!("{what}: probabilities sum to {total}, not 1")));
    }
    Ok(probs.iter().map(|p| p.log2()).collect())
}

fn fmt_probs(probs: &[f64]) -> String {
    probs.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(",")
}

impl Measure {
    /// Compiles a description against an alphabet.
    pub fn from_spec(spec: &MeasureSpec, alphabet: Alphabet) -> Result<Measure> {
        let binary = alphabet.size() == 2;
        let (id, kernel) = match spec {
            MeasureSpec::Bernoulli { p } => {
                if !binary {
                    return Err(Error::invalid("bernoulli measures need a binary alphabet"));
                }
                let log2p = check_distribution(&[1.0 - p, *p], alphabet, "bernoulli")?;
                (format!("bernoulli({p})"), Kernel::Iid { log2p })
            }
            MeasureSpec::Iid { probs } => {
                let log2p = check_distribution(probs, alphabet, "iid")?;
                (format!("iid[{}]", fmt_probs(probs)), Kernel::Iid { log2p })
            }
            MeasureSpec::Uniform => {
                let m = alphabet.size();
                let log2p = vec![-(m as f64).log2(); m];
                (format!("uniform({m})"), Kernel::Iid { log2p })
            }
            MeasureSpec::Markov { order, probs } => {
                let contexts = alphabet
                    .strings(*order)
                    .filter(|&c| c <= 1 << 16)
                    .ok_or_else(|| Error::invalid("markov order too large"))? as usize;
                if probs.len() != contexts {
                    return Err(Error::invalid(format!(
                        "markov order {order} needs {contexts} rows, got {}",
                        probs.len()
                    )));
                }
                let mut log2p = Vec::with_capacity(contexts * alphabet.size());
                for row in probs {
                    log2p.extend(check_distribution(row, alphabet, "markov row")?);
                }
                let body = if binary {
                    probs.iter().map(|r| r[1].to_string()).collect::<Vec<_>>().join(",")
                } else {
                    probs.iter().map(|r| fmt_probs(r)).collect::<Vec<_>>().join(";")
                };
                (format!("markov{order}[{body}]"), Kernel::Markov { order: *order, log2p })
            }
            MeasureSpec::ChangePoint { segments } => {
                if segments.is_empty() || segments[0].start != 1 {
                    return Err(Error::invalid("change-point segments must start at time 1"));
                }
                if segments.windows(2).any(|w| w[1].start <= w[0].start) {
                    return Err(Error::invalid("change-point start times must increase"));
                }
                let log2p = segments
                    .iter()
                    .map(|s| check_distribution(&s.probs, alphabet, "segment"))
                    .collect::<Result<Vec<_>>>()?;
                let body = segments
                    .iter()
                    .map(|s| {
                        let p = if binary { s.probs[1].to_string() } else { format!("[{}]", fmt_probs(&s.probs)) };
                        format!("{p}@{}", s.start)
                    })
                    .collect::<Vec<_>>()
                    .join(",");
                let starts = segments.iter().map(|s| s.start - 1).collect();
                (format!("cp({body})"), Kernel::ChangePoint { starts, log2p })
            }
            MeasureSpec::Dirac { prefix, tail } => {
                let mut prefix = alphabet.parse(prefix)?;
                alphabet.check(&[*tail])?;
                while prefix.last() == Some(tail) {
                    prefix.pop();
                }
                let id = format!("dirac({}|{tail})", alphabet.render(&prefix));
                (id, Kernel::Dirac { prefix, tail: *tail })
            }
            MeasureSpec::Mixture { components } => {
                let built = components
                    .iter()
                    .map(|c| Ok((c.weight, Measure::from_spec(&c.measure, alphabet)?)))
                    .collect::<Result<Vec<_>>>()?;
                return Measure::mixture(built);
            }
        };
        Ok(Measure { alphabet, id, spec: canonical_spec(spec, &kernel, alphabet), kernel })
    }

    pub fn bernoulli(p: f64) -> Result<Measure> {
        Measure::from_spec(&MeasureSpec::Bernoulli { p }, Alphabet::BINARY)
    }

    /// The i.i.d. measure with equal symbol probabilities, `δ(x₁..xₙ) = |X|⁻ⁿ`.
    pub fn uniform(alphabet: Alphabet) -> Measure {
        Measure::from_spec(&MeasureSpec::Uniform, alphabet).expect("uniform is always valid")
    }

    pub fn iid(alphabet: Alphabet, probs: &[f64]) -> Result<Measure> {
        Measure::from_spec(&MeasureSpec::Iid { probs: probs.to_vec() }, alphabet)
    }

    /// Binary order-1 Markov chain with `P(1 | 0) = p01`, `P(1 | 1) = p11`.
    pub fn markov1(p01: f64, p11: f64) -> Result<Measure> {
        Measure::from_spec(
            &MeasureSpec::Markov { order: 1, probs: vec![vec![1.0 - p01, p01], vec![1.0 - p11, p11]] },
            Alphabet::BINARY,
        )
    }

    pub fn dirac(alphabet: Alphabet, prefix: &[Symbol], tail: Symbol) -> Result<Measure> {
        alphabet.check(prefix)?;
        Measure::from_spec(&MeasureSpec::Dirac { prefix: alphabet.render(prefix), tail }, alphabet)
    }

    /// Finite mixture. Weights must be positive and sum to 1.
    pub fn mixture(components: Vec<(f64, Measure)>) -> Result<Measure> {
        let alphabet = components
            .first()
            .map(|(_, m)| m.alphabet)
            .ok_or_else(|| Error::invalid("mixture needs at least one component"))?;
        if components.iter().any(|(_, m)| m.alphabet != alphabet) {
            return Err(Error::invalid("mixture components use different alphabets"));
        }
        if components.iter().any(|(w, _)| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::invalid("mixture weights must be positive"));
        }
        let total: f64 = components.iter().map(|(w, _)| w).sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::invalid(format!("mixture weights sum to {total}, not 1")));
        }
        let id =
            format!("mix({})", components.iter().map(|(w, m)| format!("{w}*{}", m.id)).collect::<Vec<_>>().join("+"));
        let spec = MeasureSpec::Mixture {
            components: components.iter().map(|(w, m)| Component { weight: *w, measure: m.spec.clone() }).collect(),
        };
        Ok(Measure { alphabet, id, spec, kernel: Kernel::Mixture { components } })
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    /// Canonical identity (family and parameters).
    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn spec(&self) -> &MeasureSpec {
        &self.spec
    }

    pub fn is_mixture(&self) -> bool {
        matches!(self.kernel, Kernel::Mixture { .. })
    }

    /// Whether this is the equal-probability i.i.d. measure.
    pub fn is_uniform(&self) -> bool {
        match &self.kernel {
            Kernel::Iid { log2p } => {
                let target = -self.alphabet.bits();
                log2p.iter().all(|&l| (l - target).abs() < 1e-15)
            }
            _ => false,
        }
    }

    /// The deterministic sequence of a Dirac measure as `(prefix, tail)`.
    pub fn as_dirac(&self) -> Option<(&[Symbol], Symbol)> {
        match &self.kernel {
            Kernel::Dirac { prefix, tail } => Some((prefix, *tail)),
            _ => None,
        }
    }

    /// Flattens nested mixtures into weighted non-mixture measures.
    pub fn atoms(&self) -> Vec<(f64, &Measure)> {
        let mut out = Vec::new();
        self.collect_atoms(1.0, &mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, scale: f64, out: &mut Vec<(f64, &'a Measure)>) {
        match &self.kernel {
            Kernel::Mixture { components } => {
                for (w, m) in components {
                    m.collect_atoms(scale * w, out);
                }
            }
            _ => out.push((scale, self)),
        }
    }

    /// Log₂ of the next-symbol conditional for a non-mixture measure, assuming
    /// `prefix` has positive probability.
    pub(crate) fn step(&self, prefix: &[Symbol], a: Symbol) -> f64 {
        let t = prefix.len();
        let size = self.alphabet.size();
        match &self.kernel {
            Kernel::Iid { log2p } => log2p[a as usize],
            Kernel::Markov { order, log2p } => {
                let ctx = (0..*order).fold(0usize, |acc, j| {
                    // position t - order + j, zero before the start
                    let sym = (t + j).checked_sub(*order).map_or(0, |pos| prefix[pos] as usize);
                    acc * size + sym
                });
                log2p[ctx * size + a as usize]
            }
            Kernel::ChangePoint { starts, log2p } => {
                let seg = starts.partition_point(|&s| s <= t) - 1;
                log2p[seg][a as usize]
            }
            Kernel::Dirac { prefix: seq, tail } => {
                let expected = seq.get(t).copied().unwrap_or(*tail);
                if a == expected {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
            Kernel::Mixture { .. } => unreachable!("step is only defined for atoms"),
        }
    }

    fn marginal_log2(&self, x: &[Symbol]) -> f64 {
        match &self.kernel {
            Kernel::Mixture { components } => {
                log2_sum_exp(components.iter().map(|(w, m)| w.log2() + m.marginal_log2(x)))
            }
            _ => {
                let mut acc = 0.0;
                for t in 0..x.len() {
                    acc += self.step(&x[..t], x[t]);
                    if acc == f64::NEG_INFINITY {
                        break;
                    }
                }
                acc
            }
        }
    }

    /// `log₂ P(x₁..xₙ)`.
    pub fn marginal(&self, x: &[Symbol]) -> Result<LogProb> {
        self.alphabet.check(x)?;
        if x.is_empty() {
            return Ok(LogProb::ONE);
        }
        Ok(LogProb::from_log2(self.marginal_log2(x)))
    }

    /// `log₂ P(xₜ = a | prefix)`.
    pub fn conditional(&self, prefix: &[Symbol], a: Symbol) -> Result<LogProb> {
        self.alphabet.check(prefix)?;
        self.alphabet.check(&[a])?;
        let base = self.marginal_log2(prefix);
        if base == f64::NEG_INFINITY {
            return Err(Error::UndefinedConditional);
        }
        let value = match &self.kernel {
            Kernel::Mixture { .. } => {
                let mut extended = prefix.to_vec();
                extended.push(a);
                let joint = self.marginal_log2(&extended);
                if joint == f64::NEG_INFINITY {
                    joint
                } else {
                    joint - base
                }
            }
            _ => self.step(prefix, a),
        };
        Ok(LogProb::from_log2(value))
    }

    /// Draws `x₁..xₙ`; deterministic in `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<Symbol> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_with(&mut rng, n)
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<Symbol> {
        match &self.kernel {
            Kernel::Mixture { components } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut chosen = &components[components.len() - 1].1;
                for (w, m) in components {
                    acc += w;
                    if u < acc {
                        chosen = m;
                        break;
                    }
                }
                chosen.sample_with(rng, n)
            }
            _ => {
                let mut x = Vec::with_capacity(n);
                for _ in 0..n {
                    let a = self.draw_next(rng, &x);
                    x.push(a);
                }
                x
            }
        }
    }

    fn draw_next<R: Rng + ?Sized>(&self, rng: &mut R, prefix: &[Symbol]) -> Symbol {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut last_positive = 0;
        for a in 0..self.alphabet.size() as Symbol {
            let p = self.step(prefix, a).exp2();
            if p > 0.0 {
                acc += p;
                last_positive = a;
                if u < acc {
                    return a;
                }
            }
        }
        last_positive
    }
}

/// Dirac prefixes are stored trimmed so equal sequences share one spec.
fn canonical_spec(spec: &MeasureSpec, kernel: &Kernel, alphabet: Alphabet) -> MeasureSpec {
    match kernel {
        Kernel::Dirac { prefix, tail } => MeasureSpec::Dirac { prefix: alphabet.render(prefix), tail: *tail },
        _ => spec.clone(),
    }
}

impl PartialEq for Measure {
    fn eq(&self, other: &Self) -> bool {
        self.alphabet == other.alphabet && self.id == other.id
    }
}

impl Serialize for Measure {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.spec.serialize(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_strings(alphabet: Alphabet, n: usize) -> Vec<Vec<Symbol>> {
        (0..alphabet.strings(n).unwrap() as usize).map(|i| alphabet.string_at(i, n)).collect()
    }

    #[test]
    fn bernoulli_half_is_uniform_on_strings() {
        let m = Measure::bernoulli(0.5).unwrap();
        for x in all_strings(Alphabet::BINARY, 3) {
            assert_eq!(m.marginal(&x).unwrap().log2(), -3.0);
        }
    }

    #[test]
    fn bernoulli_product() {
        let m = Measure::bernoulli(0.7).unwrap();
        let got = m.marginal(&[1, 0]).unwrap().log2();
        assert!((got - (0.7f64 * 0.3).log2()).abs() < 1e-12);
        let c = m.conditional(&[0, 0, 1], 1).unwrap().log2();
        assert!((c - 0.7f64.log2()).abs() < 1e-15);
    }

    #[test]
    fn dirac_point_mass() {
        let d = Measure::dirac(Alphabet::BINARY, &[], 0).unwrap();
        assert_eq!(d.marginal(&[0, 0, 0]).unwrap().log2(), 0.0);
        assert!(d.marginal(&[0, 0, 1]).unwrap().is_zero());
        assert!(d.conditional(&[0, 0], 1).unwrap().is_zero());
        assert_eq!(d.conditional(&[0, 1], 0), Err(Error::UndefinedConditional));
        assert_eq!(d.sample(5, 99), vec![0; 5]);
    }

    #[test]
    fn dirac_prefix_is_trimmed() {
        let d = Measure::dirac(Alphabet::BINARY, &[1, 0, 0], 0).unwrap();
        assert_eq!(d.id(), "dirac(1|0)");
        assert_eq!(d.as_dirac().unwrap().0, &[1]);
    }

    #[test]
    fn markov_transition() {
        let m = Measure::markov1(0.2, 0.9).unwrap();
        let c = m.conditional(&[1, 1, 0], 1).unwrap().log2();
        assert!((c - 0.2f64.log2()).abs() < 1e-15);
        let c = m.conditional(&[0, 1], 1).unwrap().log2();
        assert!((c - 0.9f64.log2()).abs() < 1e-15);
        // empty history reads as a preceding 0
        let c = m.conditional(&[], 1).unwrap().log2();
        assert!((c - 0.2f64.log2()).abs() < 1e-15);
        assert_eq!(m.id(), "markov1[0.2,0.9]");
    }

    #[test]
    fn change_point_switches_segment() {
        let spec = MeasureSpec::ChangePoint {
            segments: vec![Segment { start: 1, probs: vec![0.8, 0.2] }, Segment { start: 3, probs: vec![0.1, 0.9] }],
        };
        let m = Measure::from_spec(&spec, Alphabet::BINARY).unwrap();
        assert_eq!(m.id(), "cp(0.2@1,0.9@3)");
        let c1 = m.conditional(&[0], 1).unwrap().log2();
        let c3 = m.conditional(&[0, 0], 1).unwrap().log2();
        assert!((c1 - 0.2f64.log2()).abs() < 1e-15);
        assert!((c3 - 0.9f64.log2()).abs() < 1e-15);
    }

    #[test]
    fn uniform_measure_values() {
        let u = Measure::uniform(Alphabet::BINARY);
        assert_eq!(u.marginal(&[1]).unwrap().prob(), 0.5);
        assert_eq!(u.marginal(&[1, 0, 1, 1]).unwrap().log2(), -4.0);
        let t = Measure::uniform(Alphabet::new(3).unwrap());
        assert!((t.marginal(&[2, 1]).unwrap().prob() - 1.0 / 9.0).abs() < 1e-15);
        assert!(u.is_uniform());
        assert!(Measure::bernoulli(0.5).unwrap().is_uniform());
    }

    #[test]
    fn symbol_out_of_alphabet() {
        let m = Measure::bernoulli(0.3).unwrap();
        assert!(matches!(m.marginal(&[0, 2]), Err(Error::SymbolOutOfRange { .. })));
    }

    #[test]
    fn mixture_marginals_and_conditionals() {
        let a = Measure::dirac(Alphabet::BINARY, &[], 0).unwrap();
        let b = Measure::dirac(Alphabet::BINARY, &[1], 0).unwrap();
        let mix = Measure::mixture(vec![(0.5, a), (0.5, b)]).unwrap();
        assert!((mix.conditional(&[], 0).unwrap().prob() - 0.5).abs() < 1e-15);
        assert_eq!(mix.conditional(&[1], 0).unwrap().prob(), 1.0);
        assert_eq!(mix.atoms().len(), 2);
        assert!(Measure::mixture(vec![(0.4, Measure::bernoulli(0.1).unwrap())]).is_err());
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(Measure::bernoulli(1.5).is_err());
        assert!(Measure::iid(Alphabet::BINARY, &[0.2, 0.2]).is_err());
        let bad_markov = MeasureSpec::Markov { order: 1, probs: vec![vec![0.5, 0.5]] };
        assert!(Measure::from_spec(&bad_markov, Alphabet::BINARY).is_err());
        assert!(Measure::from_spec(&MeasureSpec::Bernoulli { p: 0.5 }, Alphabet::new(3).unwrap()).is_err());
    }

    #[test]
    fn deterministic_sampling() {
        let m = Measure::bernoulli(1.0).unwrap();
        assert_eq!(m.sample(3, 7), vec![1, 1, 1]);
        let m = Measure::bernoulli(0.5).unwrap();
        assert_eq!(m.sample(50, 1), m.sample(50, 1));
        let x = m.sample(10_000, 2024);
        let freq = x.iter().filter(|&&a| a == 1).count() as f64 / 1e4;
        assert!((freq - 0.5).abs() <= 0.02, "frequency {freq}");
    }

    #[test]
    fn spec_json_round_trip() {
        let json = r#"{"kind":"markov","order":1,"probs":[[0.8,0.2],[0.3,0.7]]}"#;
        let spec: MeasureSpec = serde_json::from_str(json).unwrap();
        let m = Measure::from_spec(&spec, Alphabet::BINARY).unwrap();
        let back: MeasureSpec = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back, spec);
    }
}
