//! Covering of `Xⁿ` by high-likelihood-ratio cells and greedy selection.
//!
//! For a class member `μ` and the (uniform-mixed) reference `ρ'`:
//!
//! ```text
//! Tⁿ_μ       = { x : μ(x)/ρ'(x) ≥ 1/n }
//! Tⁿ_{μ,k,i} = { x ∈ Tⁿ_μ : (1/n) log₂(μ(x)/ρ'(x)) ∈ uⁱ_k }
//! ```
//!
//! For each `(n, k, i)` the greedy step repeatedly picks the member whose
//! cell adds the most uncovered `ρ'`-mass, until nothing more can be added.
//! Because the increments are disjoint with non-increasing mass, after `l`
//! selections every member's cell has at most `1/l` of `ρ'`-mass uncovered.

use serde::Serialize;

use super::partition::{intervals_for, partition_thresholds, IntervalPartition, BOUNDARY_TOLERANCE};
use super::weights::WeightScheme;
use crate::alphabet::{Alphabet, Symbol};
use crate::enumerate::{Evaluator, LogTable};
use crate::error::{Error, Result};
use crate::measure::{Measure, ModelClass};

// ---------------------------------------------------------------------------
// String sets
// ---------------------------------------------------------------------------

/// A set of length-`n` strings, stored as sorted lexicographic ranks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StringSet {
    #[serde(skip)]
    alphabet: Alphabet,
    n: usize,
    ranks: Vec<usize>,
}

impl StringSet {
    pub fn from_ranks(alphabet: Alphabet, n: usize, mut ranks: Vec<usize>) -> Self {
        ranks.sort_unstable();
        ranks.dedup();
        StringSet { alphabet, n, ranks }
    }

    pub fn horizon(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranks.is_empty()
    }

    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    pub fn contains_rank(&self, rank: usize) -> bool {
        self.ranks.binary_search(&rank).is_ok()
    }

    pub fn contains(&self, x: &[Symbol]) -> bool {
        x.len() == self.n && self.contains_rank(self.alphabet.index_of(x))
    }

    pub fn strings(&self) -> impl Iterator<Item = Vec<Symbol>> + '_ {
        self.ranks.iter().map(|&r| self.alphabet.string_at(r, self.n))
    }

    pub fn difference(&self, other: &StringSet) -> StringSet {
        let ranks = self.ranks.iter().copied().filter(|&r| !other.contains_rank(r)).collect();
        StringSet { alphabet: self.alphabet, n: self.n, ranks }
    }
}

// ---------------------------------------------------------------------------
// Per-horizon classification
// ---------------------------------------------------------------------------

/// Whether `log₂(μ/ρ') >= -log₂ n`, up to the boundary tolerance.
pub(crate) fn in_high_ratio_set(log_mu: f64, log_ref: f64, n: usize) -> bool {
    if log_mu == f64::NEG_INFINITY {
        return false;
    }
    let threshold = -(n as f64).log2();
    log_mu - log_ref >= threshold - BOUNDARY_TOLERANCE * threshold.abs().max(1.0)
}

/// Log-probabilities of the members and of `ρ'` at one horizon, with every
/// string assigned to its cell (0 when outside `Tⁿ_μ`).
pub(crate) struct Horizon {
    pub alphabet: Alphabet,
    pub n: usize,
    pub partition: IntervalPartition,
    /// `ρ'(x)` by rank.
    pub reference: Vec<f64>,
    /// `[member][rank]`
    pub member_log: Vec<Vec<f64>>,
    /// `[member][rank]`, 1-based cell index or 0.
    pub cell_of: Vec<Vec<u32>>,
}

impl Horizon {
    /// `table` holds the members in columns `0..members` and `ρ'` in the last column.
    pub(crate) fn from_table(table: &LogTable, members: usize, k: usize) -> Result<Self> {
        let n = table.horizon();
        let alphabet = table.alphabet();
        let partition = partition_thresholds(n, k, alphabet.bits())?;
        let reference_log = table.column(members);
        let reference: Vec<f64> = reference_log.iter().map(|l| l.exp2()).collect();
        let member_log: Vec<Vec<f64>> = (0..members).map(|j| table.column(j)).collect();
        let mut cell_of = Vec::with_capacity(members);
        for logs in &member_log {
            let mut cells = vec![0u32; logs.len()];
            for (rank, (&lm, &lr)) in logs.iter().zip(&reference_log).enumerate() {
                if !in_high_ratio_set(lm, lr, n) {
                    continue;
                }
                let scaled = (lm - lr) / n as f64;
                let i = partition.locate(scaled).ok_or_else(|| {
                    Error::invalid(format!(
                        "normalized log-ratio {scaled} exceeds M + 1/n at n = {n}; \
                         the reference must satisfy -log2 rho(x) <= nM + 1"
                    ))
                })?;
                cells[rank] = i as u32;
            }
            cell_of.push(cells);
        }
        Ok(Horizon { alphabet, n, partition, reference, member_log, cell_of })
    }

    pub(crate) fn high_ratio_ranks(&self, member: usize) -> Vec<usize> {
        self.cell_of[member].iter().enumerate().filter(|(_, &c)| c != 0).map(|(r, _)| r).collect()
    }

    pub(crate) fn cell_ranks(&self, member: usize, i: usize) -> Vec<usize> {
        self.cell_of[member].iter().enumerate().filter(|(_, &c)| c as usize == i).map(|(r, _)| r).collect()
    }

    pub(crate) fn mass(&self, ranks: &[usize]) -> f64 {
        ranks.iter().map(|&r| self.reference[r]).sum()
    }
}

fn single_table(mu: &Measure, rho_prime: &Measure, n: usize, budget: u64) -> Result<LogTable> {
    Evaluator::new(&[mu, rho_prime])?.table(n, budget)
}

fn class_table(class: &ModelClass, rho_prime: &Measure, n: usize, budget: u64) -> Result<LogTable> {
    let mut measures: Vec<&Measure> = class.measures().iter().collect();
    measures.push(rho_prime);
    Evaluator::new(&measures)?.table(n, budget)
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// `Tⁿ_μ = { x : μ(x)/ρ'(x) ≥ 1/n }`.
pub fn high_ratio_set(mu: &Measure, rho_prime: &Measure, n: usize, budget: u64) -> Result<StringSet> {
    if n == 0 {
        return Err(Error::invalid("horizon must be at least 1"));
    }
    let table = single_table(mu, rho_prime, n, budget)?;
    let ranks = (0..table.len()).filter(|&r| in_high_ratio_set(table.get(r, 0), table.get(r, 1), n)).collect();
    Ok(StringSet::from_ranks(mu.alphabet(), n, ranks))
}

/// One cell `Tⁿ_{μ,k,i}` with its `ρ'`-mass.
#[derive(Debug, Clone, Serialize)]
pub struct CoverCell {
    pub measure: String,
    pub n: usize,
    pub k: usize,
    pub i: usize,
    pub strings: StringSet,
    pub mass: f64,
}

/// The `k` cells of `Tⁿ_μ`, in order `i = 1..=k`.
pub fn cover_cells(mu: &Measure, rho_prime: &Measure, n: usize, k: usize, budget: u64) -> Result<Vec<CoverCell>> {
    let table = single_table(mu, rho_prime, n, budget)?;
    let horizon = Horizon::from_table(&table, 1, k)?;
    Ok((1..=k)
        .map(|i| {
            let ranks = horizon.cell_ranks(0, i);
            CoverCell {
                measure: mu.id().to_owned(),
                n,
                k,
                i,
                mass: horizon.mass(&ranks),
                strings: StringSet::from_ranks(mu.alphabet(), n, ranks),
            }
        })
        .collect())
}

/// One greedy step: the chosen member, its gain, and the newly covered strings.
#[derive(Debug, Clone, Serialize)]
pub struct GreedySelection {
    pub member: usize,
    pub gain: f64,
    pub added: Vec<usize>,
}

/// Greedy covering of the level-`i` cells of all class members.
#[derive(Debug, Clone, Serialize)]
pub struct GreedyCover {
    pub n: usize,
    pub k: usize,
    pub i: usize,
    pub selections: Vec<GreedySelection>,
}

impl GreedyCover {
    pub fn len(&self) -> usize {
        self.selections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selections.is_empty()
    }

    pub fn gains(&self) -> Vec<f64> {
        self.selections.iter().map(|s| s.gain).collect()
    }

    /// Ranks of `T_l`, the union of the first `l` selected cells.
    pub fn covered(&self, l: usize) -> Vec<usize> {
        let mut ranks: Vec<usize> = self.selections.iter().take(l).flat_map(|s| s.added.iter().copied()).collect();
        ranks.sort_unstable();
        ranks
    }
}

/// Greedy loop over precomputed cells. Ties go to the lowest member index.
pub(crate) fn greedy_over(cells: &[Vec<usize>], mass: &[f64], n: usize, k: usize, i: usize) -> GreedyCover {
    let mut covered = vec![false; mass.len()];
    let mut selections = Vec::new();
    loop {
        let mut best: Option<(usize, f64)> = None;
        for (member, cell) in cells.iter().enumerate() {
            let gain: f64 = cell.iter().filter(|&&r| !covered[r]).map(|&r| mass[r]).sum();
            if gain > best.map_or(0.0, |(_, g)| g) {
                best = Some((member, gain));
            }
        }
        let Some((member, gain)) = best else { break };
        let added: Vec<usize> = cells[member].iter().copied().filter(|&r| !covered[r]).collect();
        for &r in &added {
            covered[r] = true;
        }
        selections.push(GreedySelection { member, gain, added });
    }
    GreedyCover { n, k, i, selections }
}

pub(crate) fn greedy_for_horizon(horizon: &Horizon, i: usize) -> GreedyCover {
    let cells: Vec<Vec<usize>> = (0..horizon.member_log.len()).map(|m| horizon.cell_ranks(m, i)).collect();
    greedy_over(&cells, &horizon.reference, horizon.n, horizon.partition.k, i)
}

/// Greedy cover of level `i` at horizon `n` with `k` intervals.
pub fn greedy_cover(
    class: &ModelClass,
    rho_prime: &Measure,
    n: usize,
    k: usize,
    i: usize,
    budget: u64,
) -> Result<GreedyCover> {
    if !(1..=k).contains(&i) {
        return Err(Error::invalid(format!("cell index {i} outside 1..={k}")));
    }
    let table = class_table(class, rho_prime, n, budget)?;
    let horizon = Horizon::from_table(&table, class.len(), k)?;
    Ok(greedy_for_horizon(&horizon, i))
}

/// Greedy cover at horizon `n` using the default interval count for `n`.
pub fn greedy_cover_default_k(
    class: &ModelClass,
    rho_prime: &Measure,
    n: usize,
    i: usize,
    budget: u64,
) -> Result<GreedyCover> {
    greedy_cover(class, rho_prime, n, intervals_for(n), i, budget)
}

/// One weighted term `w_l μ_l` of a cell mixture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MixtureTerm {
    pub l: u64,
    pub member: usize,
    pub weight: f64,
}

/// `ν_{n,k,i} = Σ_l w_l μ_l` over the retained selections (a sub-probability).
#[derive(Debug, Clone, Serialize)]
pub struct CellMixture {
    pub n: usize,
    pub k: usize,
    pub i: usize,
    /// `l_i = ⌈kn 2^{iMn/k + 1}⌉` as a real number (may be astronomically large).
    pub tail_index: f64,
    pub terms: Vec<MixtureTerm>,
}

impl CellMixture {
    pub fn total_weight(&self) -> f64 {
        self.terms.iter().map(|t| t.weight).sum()
    }
}

/// `l_i = ⌈kn 2^{iMn/k + 1}⌉`.
pub fn tail_index(n: usize, k: usize, i: usize, bits: f64) -> f64 {
    let exponent = i as f64 * bits * n as f64 / k as f64 + 1.0;
    ((k * n) as f64 * exponent.exp2()).ceil()
}

/// Weights the greedy selections by `w_l`, keeping the first
/// `min(l_i, #selections)` of them.
pub fn cell_mixture(cover: &GreedyCover, bits: f64, scheme: &WeightScheme) -> CellMixture {
    let tail = tail_index(cover.n, cover.k, cover.i, bits);
    let keep = if tail >= cover.len() as f64 { cover.len() } else { tail as usize };
    let terms = cover
        .selections
        .iter()
        .take(keep)
        .enumerate()
        .map(|(idx, s)| {
            let l = idx as u64 + 1;
            MixtureTerm { l, member: s.member, weight: scheme.weight(l) }
        })
        .collect();
    CellMixture { n: cover.n, k: cover.k, i: cover.i, tail_index: tail, terms }
}
