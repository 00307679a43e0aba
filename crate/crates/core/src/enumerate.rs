//! Exhaustive evaluation of several measures over all of `Xⁿ`.
//!
//! Strings are visited in lexicographic order by depth-first prefix
//! extension, so every measure costs one conditional per tree node rather
//! than `n` per leaf. Mixtures are flattened into their atoms first and the
//! atoms are shared between all requested measures (deduplicated by id).
//!
//! The tree is cut at a fixed depth into subtrees that are walked in
//! parallel; the cut depends only on `|X|` and `n`, and partial results are
//! combined left to right, so results do not depend on the thread count.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::alphabet::{Alphabet, Symbol};
use crate::error::{Error, Result};
use crate::logprob::log2_sum_exp;
use crate::measure::Measure;

/// Default cap on `|X|ⁿ`.
pub const DEFAULT_BUDGET: u64 = 1 << 24;

/// Subtrees below this many leaves are not split further.
const MIN_CHUNKS: usize = 256;

/// Returns `|X|ⁿ` if it is within `budget`.
pub fn check_budget(alphabet: Alphabet, n: usize, budget: u64) -> Result<usize> {
    let states = alphabet.strings(n).unwrap_or(u128::MAX);
    if states > budget as u128 {
        return Err(Error::BudgetExceeded { n, states, budget });
    }
    Ok(states as usize)
}

/// Joint evaluator for a fixed list of measures over one alphabet.
pub struct Evaluator<'a> {
    alphabet: Alphabet,
    atoms: Vec<&'a Measure>,
    /// For each requested measure: `(atom index, log₂ weight)` terms.
    views: Vec<Vec<(usize, f64)>>,
}

impl<'a> Evaluator<'a> {
    pub fn new(measures: &[&'a Measure]) -> Result<Self> {
        let alphabet = measures.first().map(|m| m.alphabet()).ok_or_else(|| Error::invalid("nothing to evaluate"))?;
        let mut atoms: Vec<&'a Measure> = Vec::new();
        let mut index: HashMap<&str, usize> = HashMap::new();
        let mut views = Vec::with_capacity(measures.len());
        for m in measures {
            if m.alphabet() != alphabet {
                return Err(Error::invalid("measures use different alphabets"));
            }
            let mut view: Vec<(usize, f64)> = Vec::new();
            for (w, atom) in m.atoms() {
                let j = *index.entry(atom.id()).or_insert_with(|| {
                    atoms.push(atom);
                    atoms.len() - 1
                });
                match view.iter_mut().find(|(a, _)| *a == j) {
                    Some(term) => term.1 = (term.1.exp2() + w).log2(),
                    None => view.push((j, w.log2())),
                }
            }
            views.push(view);
        }
        Ok(Evaluator { alphabet, atoms, views })
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    /// Number of requested measures (the width of each visited row).
    pub fn width(&self) -> usize {
        self.views.len()
    }

    fn atom_logs(&self, x: &[Symbol], out: &mut [f64]) {
        for (slot, atom) in out.iter_mut().zip(&self.atoms) {
            let mut acc = 0.0;
            for t in 0..x.len() {
                acc += atom.step(&x[..t], x[t]);
                if acc == f64::NEG_INFINITY {
                    break;
                }
            }
            *slot = acc;
        }
    }

    fn project(&self, atom_logs: &[f64], out: &mut [f64]) {
        for (slot, view) in out.iter_mut().zip(&self.views) {
            *slot = match view.as_slice() {
                [(j, w)] if *w == 0.0 => atom_logs[*j],
                terms => log2_sum_exp(terms.iter().map(|&(j, w)| w + atom_logs[j])),
            };
        }
    }

    fn descend<F: FnMut(&[Symbol], &[f64])>(
        &self,
        x: &mut Vec<Symbol>,
        levels: &mut [Vec<f64>],
        n: usize,
        row: &mut [f64],
        leaf: &mut F,
    ) {
        let t = x.len();
        if t == n {
            self.project(&levels[t], row);
            leaf(x, row);
            return;
        }
        for a in 0..self.alphabet.size() as Symbol {
            {
                let (head, tail) = levels.split_at_mut(t + 1);
                let parent = &head[t];
                for ((child, &p), atom) in tail[0].iter_mut().zip(parent).zip(&self.atoms) {
                    *child = if p == f64::NEG_INFINITY { p } else { p + atom.step(x, a) };
                }
            }
            x.push(a);
            self.descend(x, levels, n, row, leaf);
            x.pop();
        }
    }

    fn split_depth(&self, n: usize) -> usize {
        let mut depth = 0;
        let mut chunks = 1usize;
        while depth < n && chunks < MIN_CHUNKS {
            chunks *= self.alphabet.size();
            depth += 1;
        }
        depth
    }

    /// Folds `visit(acc, x, logs)` over every `x ∈ Xⁿ`, where `logs[j]` is
    /// `log₂ Pⱼ(x)` for the j-th requested measure. Each subtree gets its own
    /// accumulator from `init`; accumulators are merged in lexicographic order.
    pub fn fold<A, I, F, R>(&self, n: usize, budget: u64, init: I, visit: F, merge: R) -> Result<A>
    where
        A: Send,
        I: Fn() -> A + Sync,
        F: Fn(&mut A, &[Symbol], &[f64]) + Sync,
        R: Fn(A, A) -> A,
    {
        check_budget(self.alphabet, n, budget)?;
        let depth = self.split_depth(n);
        let chunks = self.alphabet.strings(depth).expect("within budget") as usize;
        let parts: Vec<A> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut acc = init();
                let mut x = self.alphabet.string_at(c, depth);
                x.reserve(n - depth);
                let mut levels = vec![vec![0.0; self.atoms.len()]; n + 1];
                self.atom_logs(&x, &mut levels[depth]);
                let mut row = vec![0.0; self.width()];
                self.descend(&mut x, &mut levels, n, &mut row, &mut |x, logs| visit(&mut acc, x, logs));
                acc
            })
            .collect();
        let mut parts = parts.into_iter();
        let first = parts.next().expect("at least one chunk");
        Ok(parts.fold(first, merge))
    }

    /// Materializes every row: `table.row(idx)` for the lexicographic index of `x`.
    pub fn table(&self, n: usize, budget: u64) -> Result<LogTable> {
        let width = self.width();
        let data = self.fold(
            n,
            budget,
            Vec::new,
            |acc: &mut Vec<f64>, _, logs| acc.extend_from_slice(logs),
            |mut a, b| {
                a.extend(b);
                a
            },
        )?;
        Ok(LogTable { alphabet: self.alphabet, n, width, data })
    }
}

/// Dense table of `log₂ Pⱼ(x)` for all `x ∈ Xⁿ` and requested measures `j`.
#[derive(Debug, Clone)]
pub struct LogTable {
    alphabet: Alphabet,
    n: usize,
    width: usize,
    data: Vec<f64>,
}

impl LogTable {
    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn horizon(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.width
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, index: usize) -> &[f64] {
        &self.data[index * self.width..(index + 1) * self.width]
    }

    pub fn get(&self, index: usize, measure: usize) -> f64 {
        self.data[index * self.width + measure]
    }

    /// Column `j` as an owned vector.
    pub fn column(&self, measure: usize) -> Vec<f64> {
        (0..self.len()).map(|i| self.get(i, measure)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_matches_direct_marginals() {
        let a = Measure::bernoulli(0.3).unwrap();
        let b = Measure::markov1(0.2, 0.6).unwrap();
        let mix = Measure::mixture(vec![(0.25, a.clone()), (0.75, b.clone())]).unwrap();
        let ev = Evaluator::new(&[&a, &b, &mix]).unwrap();
        let table = ev.table(9, DEFAULT_BUDGET).unwrap();
        assert_eq!(table.len(), 512);
        for idx in [0, 1, 77, 300, 511] {
            let x = Alphabet::BINARY.string_at(idx, 9);
            for (j, m) in [&a, &b, &mix].iter().enumerate() {
                let direct = m.marginal(&x).unwrap().log2();
                assert!((table.get(idx, j) - direct).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn budget_is_enforced() {
        let a = Measure::bernoulli(0.3).unwrap();
        let ev = Evaluator::new(&[&a]).unwrap();
        let err = ev.table(11, 1024).unwrap_err();
        assert_eq!(err, Error::BudgetExceeded { n: 11, states: 2048, budget: 1024 });
    }

    #[test]
    fn zero_horizon_has_one_empty_string() {
        let a = Measure::bernoulli(0.3).unwrap();
        let table = Evaluator::new(&[&a]).unwrap().table(0, 16).unwrap();
        assert_eq!(table.len(), 1);
        assert_eq!(table.get(0, 0), 0.0);
    }

    #[test]
    fn shared_atoms_are_deduplicated() {
        let a = Measure::bernoulli(0.3).unwrap();
        let mix = Measure::mixture(vec![(0.5, a.clone()), (0.5, Measure::bernoulli(0.9).unwrap())]).unwrap();
        let ev = Evaluator::new(&[&a, &mix]).unwrap();
        assert_eq!(ev.atoms.len(), 2);
    }
}
