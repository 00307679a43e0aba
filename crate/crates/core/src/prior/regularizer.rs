//! Regularizer built from class members only.
//!
//! For each horizon `n`, every string that some member can produce is
//! assigned the member giving it the highest probability (lowest index on
//! ties); `r'ₙ` is the uniform average of those picks over `Aₙ`. The
//! regularizer mixes the `r'ₙ` with weights `wₙ`, renormalized over the
//! horizons actually built. Every member `μ` then satisfies
//! `r(x) ≥ wₙ |X|⁻ⁿ μ(x)` on `Aₙ`.

use serde::Serialize;

use super::weights::WeightScheme;
use crate::enumerate::{Evaluator, LogTable};
use crate::error::{Error, Result};
use crate::measure::{Measure, ModelClass};

/// `Aₙ` with the member picked for each string.
#[derive(Debug, Clone, Serialize)]
pub struct RegularizerHorizon {
    pub n: usize,
    /// `(rank of x, member μₓ)` in lexicographic order of `x`.
    pub picks: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Regularizer {
    pub horizons: Vec<RegularizerHorizon>,
}

/// One weighted pick of the normalized regularizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularizerTerm {
    pub n: usize,
    pub rank: usize,
    pub member: usize,
    pub weight: f64,
}

/// Picks the maximizing member per string; `table` columns are the members.
pub(crate) fn picks_from_table(table: &LogTable, members: usize) -> RegularizerHorizon {
    let picks = (0..table.len())
        .filter_map(|rank| {
            let row = table.row(rank);
            let mut best: Option<(usize, f64)> = None;
            for (member, &l) in row[..members].iter().enumerate() {
                if l > best.map_or(f64::NEG_INFINITY, |(_, b)| b) {
                    best = Some((member, l));
                }
            }
            best.map(|(member, _)| (rank, member))
        })
        .collect();
    RegularizerHorizon { n: table.horizon(), picks }
}

impl Regularizer {
    pub fn max_horizon(&self) -> usize {
        self.horizons.last().map_or(0, |h| h.n)
    }

    /// The picks weighted so that they sum to one.
    pub fn terms(&self, scheme: &WeightScheme) -> Vec<RegularizerTerm> {
        let horizon_total: f64 = self.horizons.iter().map(|h| scheme.weight(h.n as u64)).sum();
        self.horizons
            .iter()
            .flat_map(|h| {
                let each = scheme.weight(h.n as u64) / horizon_total / h.picks.len() as f64;
                h.picks.iter().map(move |&(rank, member)| RegularizerTerm { n: h.n, rank, member, weight: each })
            })
            .collect()
    }

    /// Total weight per class member.
    pub fn member_weights(&self, scheme: &WeightScheme, members: usize) -> Vec<f64> {
        let mut out = vec![0.0; members];
        for t in self.terms(scheme) {
            out[t.member] += t.weight;
        }
        out
    }
}

/// Builds the regularizer for horizons `1..=max_n`.
pub fn regularizer(class: &ModelClass, max_n: usize, budget: u64) -> Result<Regularizer> {
    if max_n == 0 {
        return Err(Error::invalid("regularizer needs at least one horizon"));
    }
    let measures: Vec<&Measure> = class.measures().iter().collect();
    let ev = Evaluator::new(&measures)?;
    let horizons =
        (1..=max_n).map(|n| Ok(picks_from_table(&ev.table(n, budget)?, class.len()))).collect::<Result<_>>()?;
    Ok(Regularizer { horizons })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alphabet::Alphabet;
    use crate::enumerate::DEFAULT_BUDGET;

    #[test]
    fn single_member_regularizer_is_that_member() {
        let class = ModelClass::new(Alphabet::BINARY, "one", vec![Measure::bernoulli(0.3).unwrap()]).unwrap();
        let r = regularizer(&class, 4, DEFAULT_BUDGET).unwrap();
        let w = r.member_weights(&WeightScheme::standard(), 1);
        assert!((w[0] - 1.0).abs() < 1e-15);
        assert_eq!(r.horizons[3].picks.len(), 16);
    }

    #[test]
    fn two_point_masses() {
        let d0 = Measure::dirac(Alphabet::BINARY, &[], 0).unwrap();
        let d1 = Measure::dirac(Alphabet::BINARY, &[1], 0).unwrap();
        let class = ModelClass::new(Alphabet::BINARY, "two", vec![d0, d1]).unwrap();
        let r = regularizer(&class, 3, DEFAULT_BUDGET).unwrap();
        assert_eq!(r.horizons[0].picks, vec![(0, 0), (1, 1)]);
        // A₃ = {000, 100}
        assert_eq!(r.horizons[2].picks, vec![(0, 0), (4, 1)]);
        let terms = r.terms(&WeightScheme::standard());
        let total: f64 = terms.iter().map(|t| t.weight).sum();
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ties_pick_lowest_index() {
        let a = Measure::bernoulli(0.5).unwrap();
        let b = Measure::uniform(Alphabet::BINARY);
        let class = ModelClass::new(Alphabet::BINARY, "tie", vec![a, b]).unwrap();
        let r = regularizer(&class, 2, DEFAULT_BUDGET).unwrap();
        assert!(r.horizons.iter().all(|h| h.picks.iter().all(|&(_, m)| m == 0)));
    }
}
