//! Construction of a discrete prior over a model class whose Bayes mixture
//! competes with an arbitrary reference predictor `ρ`.
//!
//! The mixture is
//!
//! ```text
//! ν = ½ Σ_{n=2..N} wₙ w_{k(n)} (1/k(n)) Σ_{i=1..k(n)} ν_{n,k(n),i}  +  (1 - covering mass) · r
//! ```
//!
//! where `ν_{n,k,i}` weights the greedy cover of level-`i` cells at horizon
//! `n` (see [`cover`]), `k(n) = ⌈n / log₂log₂n⌉`, and `r` is the
//! [`regularizer`]. Every component is a member of the class, so `ν` is a
//! Bayesian predictor with a discrete prior on the class.

pub mod cover;
pub mod partition;
pub mod regularizer;
pub mod weights;

use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use cover::{
    cell_mixture, cover_cells, greedy_cover, greedy_cover_default_k, high_ratio_set, tail_index, CellMixture,
    CoverCell, GreedyCover, GreedySelection, MixtureTerm, StringSet,
};
pub use partition::{intervals_for, partition_thresholds, IntervalPartition};
pub use regularizer::{regularizer, Regularizer, RegularizerHorizon, RegularizerTerm};
pub use weights::{weights, WeightScheme};

use crate::enumerate::{check_budget, Evaluator};
use crate::error::{Error, Result};
use crate::measure::{Measure, ModelClass};
use cover::{greedy_for_horizon, Horizon};
use regularizer::picks_from_table;

const WEIGHT_TOLERANCE: f64 = 1e-9;

// ---------------------------------------------------------------------------
// Discrete prior
// ---------------------------------------------------------------------------

/// Where a prior component came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    /// `l`-th greedy selection for cell `i` at horizon `n` with `k` intervals.
    Cover { n: usize, k: usize, i: usize, l: u64 },
    /// Regularizer pick for string `x` at horizon `n`.
    Regularizer { n: usize, x: String },
    /// Supplied directly by the caller.
    Given,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriorComponent {
    pub weight: f64,
    pub member: usize,
    pub provenance: Provenance,
}

#[derive(Serialize, Deserialize)]
struct DumpEntry {
    weight: String,
    measure: String,
    provenance: Provenance,
}

/// Finite list of weighted class members, `ν = Σ wᵢ μᵢ`, with total weight 1.
#[derive(Debug)]
pub struct DiscretePrior {
    class: ModelClass,
    components: Vec<PriorComponent>,
    mixture: OnceLock<Result<Measure>>,
}

impl Clone for DiscretePrior {
    fn clone(&self) -> Self {
        DiscretePrior { class: self.class.clone(), components: self.components.clone(), mixture: OnceLock::new() }
    }
}

impl DiscretePrior {
    pub fn new(class: ModelClass, components: Vec<PriorComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Inconsistent("prior has no components".into()));
        }
        for c in &components {
            if c.member >= class.len() {
                return Err(Error::Inconsistent(format!("component member {} outside the class", c.member)));
            }
            if !(c.weight > 0.0 && c.weight.is_finite()) {
                return Err(Error::Inconsistent(format!("non-positive weight {}", c.weight)));
            }
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(Error::Inconsistent(format!("prior weights sum to {total}, not 1")));
        }
        Ok(DiscretePrior { class, components, mixture: OnceLock::new() })
    }

    /// A prior with one [`Provenance::Given`] component per positive weight.
    pub fn from_member_weights(class: ModelClass, weights: &[f64]) -> Result<Self> {
        if weights.len() != class.len() {
            return Err(Error::invalid("one weight per class member is required"));
        }
        let components = weights
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > 0.0)
            .map(|(member, &weight)| PriorComponent { weight, member, provenance: Provenance::Given })
            .collect();
        DiscretePrior::new(class, components)
    }

    pub fn class(&self) -> &ModelClass {
        &self.class
    }

    pub fn components(&self) -> &[PriorComponent] {
        &self.components
    }

    pub fn total_weight(&self) -> f64 {
        self.components.iter().map(|c| c.weight).sum()
    }

    /// Weight per class member, summed over components.
    pub fn member_weights(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.class.len()];
        for c in &self.components {
            out[c.member] += c.weight;
        }
        out
    }

    /// The mixture `ν` as a measure over the members with positive weight.
    pub fn measure(&self) -> Result<&Measure> {
        self.mixture
            .get_or_init(|| {
                let parts = self
                    .member_weights()
                    .into_iter()
                    .enumerate()
                    .filter(|(_, w)| *w > 0.0)
                    .map(|(m, w)| (w, self.class.get(m).clone()))
                    .collect();
                Measure::mixture(parts)
            })
            .as_ref()
            .map_err(Clone::clone)
    }

    /// JSON array of `{weight, measure, provenance}`; weights are printed in
    /// shortest round-trip form so that loading reproduces them exactly.
    pub fn to_dump_json(&self) -> String {
        let entries: Vec<DumpEntry> = self
            .components
            .iter()
            .map(|c| DumpEntry {
                weight: format!("{:?}", c.weight),
                measure: self.class.get(c.member).id().to_owned(),
                provenance: c.provenance.clone(),
            })
            .collect();
        serde_json::to_string_pretty(&entries).expect("dump serializes")
    }

    /// Loads a dump against the class it was built from.
    pub fn from_dump_json(json: &str, class: &ModelClass) -> Result<Self> {
        let entries: Vec<DumpEntry> = serde_json::from_str(json)?;
        let components = entries
            .into_iter()
            .map(|e| {
                let weight: f64 = e.weight.parse().map_err(|_| Error::invalid(format!("bad weight {:?}", e.weight)))?;
                let member = class
                    .position(&e.measure)
                    .ok_or_else(|| Error::Inconsistent(format!("{} is not in the class", e.measure)))?;
                Ok(PriorComponent { weight, member, provenance: e.provenance })
            })
            .collect::<Result<Vec<_>>>()?;
        DiscretePrior::new(class.clone(), components)
    }
}

// ---------------------------------------------------------------------------
// Construction
// ---------------------------------------------------------------------------

/// `ρ' = ½ρ + ½δ` with `δ` uniform, so that `-log₂ρ'(x₁..xₙ) ≤ nM + 1`.
/// Returns `δ` itself when `ρ` is already uniform.
pub fn mix_with_uniform(rho: &Measure) -> Measure {
    let delta = Measure::uniform(rho.alphabet());
    if rho.is_uniform() {
        return delta;
    }
    Measure::mixture(vec![(0.5, rho.clone()), (0.5, delta)]).expect("two valid components")
}

/// Covering data for one horizon.
#[derive(Debug, Clone, Serialize)]
pub struct HorizonCover {
    pub n: usize,
    pub k: usize,
    pub partition: IntervalPartition,
    /// `Tⁿ_μ` per member.
    pub high_ratio: Vec<StringSet>,
    /// `Tⁿ_{μ,k,i}` as `cells[member][i - 1]`.
    pub cells: Vec<Vec<StringSet>>,
    /// Greedy covers for `i = 1..=k`.
    pub covers: Vec<GreedyCover>,
    pub mixtures: Vec<CellMixture>,
    /// `ρ'(x)` by rank.
    #[serde(skip)]
    pub reference: Vec<f64>,
}

/// The assembled prior together with every intermediate object.
#[derive(Debug, Clone)]
pub struct Construction {
    pub prior: DiscretePrior,
    pub rho_prime: Measure,
    pub horizons: Vec<HorizonCover>,
    pub regularizer: Regularizer,
    /// Total weight of the covering terms; the rest goes to the regularizer.
    pub covering_mass: f64,
}

impl Construction {
    pub fn horizon(&self, n: usize) -> Option<&HorizonCover> {
        self.horizons.iter().find(|h| h.n == n)
    }
}

fn build_horizon(horizon: Horizon, k: usize, scheme: &WeightScheme) -> HorizonCover {
    let n = horizon.n;
    let alphabet = horizon.alphabet;
    let bits = horizon.partition.bits;
    let covers: Vec<GreedyCover> = (1..=k).into_par_iter().map(|i| greedy_for_horizon(&horizon, i)).collect();
    let mixtures = covers.iter().map(|c| cell_mixture(c, bits, scheme)).collect();
    let members = horizon.member_log.len();
    let high_ratio = (0..members).map(|m| StringSet::from_ranks(alphabet, n, horizon.high_ratio_ranks(m))).collect();
    let cells = (0..members)
        .map(|m| (1..=k).map(|i| StringSet::from_ranks(alphabet, n, horizon.cell_ranks(m, i))).collect())
        .collect();
    HorizonCover {
        n,
        k,
        partition: horizon.partition.clone(),
        high_ratio,
        cells,
        covers,
        mixtures,
        reference: horizon.reference,
    }
}

/// Runs the full construction for horizons up to `max_n`.
pub fn build_construction(class: &ModelClass, rho: &Measure, max_n: usize, budget: u64) -> Result<Construction> {
    if max_n < 3 {
        return Err(Error::invalid("N must be >= 3"));
    }
    if rho.alphabet() != class.alphabet() {
        return Err(Error::invalid("reference and class use different alphabets"));
    }
    for n in 1..=max_n {
        check_budget(class.alphabet(), n, budget)?;
    }
    let scheme = WeightScheme::standard();
    let rho_prime = mix_with_uniform(rho);
    let mut measures: Vec<&Measure> = class.measures().iter().collect();
    measures.push(&rho_prime);
    let ev = Evaluator::new(&measures)?;

    let mut horizons = Vec::new();
    let mut reg_horizons = Vec::new();
    for n in 1..=max_n {
        let table = ev.table(n, budget)?;
        reg_horizons.push(picks_from_table(&table, class.len()));
        if n >= 2 {
            let k = intervals_for(n);
            let horizon = Horizon::from_table(&table, class.len(), k)?;
            horizons.push(build_horizon(horizon, k, &scheme));
        }
    }
    let regularizer = Regularizer { horizons: reg_horizons };

    let mut components = Vec::new();
    for h in &horizons {
        let scale = 0.5 * scheme.weight(h.n as u64) * scheme.weight(h.k as u64) / h.k as f64;
        for mix in &h.mixtures {
            for t in &mix.terms {
                components.push(PriorComponent {
                    weight: scale * t.weight,
                    member: t.member,
                    provenance: Provenance::Cover { n: h.n, k: h.k, i: mix.i, l: t.l },
                });
            }
        }
    }
    let covering_mass: f64 = components.iter().map(|c| c.weight).sum();
    let residual = 1.0 - covering_mass;
    let alphabet = class.alphabet();
    for t in regularizer.terms(&scheme) {
        components.push(PriorComponent {
            weight: residual * t.weight,
            member: t.member,
            provenance: Provenance::Regularizer { n: t.n, x: alphabet.render(&alphabet.string_at(t.rank, t.n)) },
        });
    }
    let prior = DiscretePrior::new(class.clone(), components)?;
    Ok(Construction { prior, rho_prime, horizons, regularizer, covering_mass })
}

/// The discrete prior for `(C, ρ, N)`.
pub fn assemble_prior(class: &ModelClass, rho: &Measure, max_n: usize, budget: u64) -> Result<DiscretePrior> {
    Ok(build_construction(class, rho, max_n, budget)?.prior)
}
