//! Explicit regret bound and its verification by exact enumeration.
//!
//! For `n ≥ 3`, `k = k(n)`, `M = log₂|X|`:
//!
//! ```text
//! Bₙ  = w³ / (4 (M+1)² n⁵ k³ log₂²n log₂²k)
//! rhs = Mn/k − log₂Bₙ + 4M − (2/n)(log₂wₙ − 1) + 1/2
//! ```
//!
//! and the mixture `ν` must satisfy `Lₙ(μ,ν) ≤ Lₙ(μ,ρ') + rhs` for every
//! class member, and `Lₙ(μ,ν) ≤ Lₙ(μ,ρ) + rhs + 1` against the original
//! reference.

use rayon::prelude::*;
use serde::Serialize;

use crate::enumerate::Evaluator;
use crate::error::{Error, Result};
use crate::loss::kl_term;
use crate::measure::{Measure, ModelClass};
use crate::prior::{build_construction, intervals_for, mix_with_uniform, DiscretePrior, WeightScheme};

/// Constants entering the bound at horizon `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundConstants {
    pub n: usize,
    pub k: usize,
    pub bits: f64,
    pub normalizer: f64,
    pub w_n: f64,
    /// `log₂ Bₙ`; `Bₙ` itself underflows for large `n`.
    pub log2_b_n: f64,
}

impl BoundConstants {
    /// Constants for `n ≥ 2` (the covering starts at 2; the bound at 3).
    pub fn new(n: usize, bits: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("bound constants need n >= 2"));
        }
        let scheme = WeightScheme::standard();
        let k = intervals_for(n);
        let nf = n as f64;
        let kf = k as f64;
        let log2_b_n = 3.0 * scheme.normalizer().log2()
            - 2.0
            - 2.0 * (bits + 1.0).log2()
            - 5.0 * nf.log2()
            - 3.0 * kf.log2()
            - 2.0 * nf.log2().log2()
            - 2.0 * kf.log2().log2();
        Ok(BoundConstants { n, k, bits, normalizer: scheme.normalizer(), w_n: scheme.weight(n as u64), log2_b_n })
    }

    pub fn b_n(&self) -> f64 {
        self.log2_b_n.exp2()
    }

    pub fn rhs(&self) -> f64 {
        let nf = self.n as f64;
        self.bits * nf / self.k as f64 - self.log2_b_n + 4.0 * self.bits - 2.0 / nf * (self.w_n.log2() - 1.0) + 0.5
    }
}

/// Right-hand side of the regret bound at horizon `n ≥ 3`.
pub fn bound_rhs(n: usize, bits: f64) -> Result<f64> {
    if n < 3 {
        return Err(Error::invalid("the bound is stated for n >= 3"));
    }
    Ok(BoundConstants::new(n, bits)?.rhs())
}

/// Outcome of checking one `(μ, n)` pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegretReport {
    pub measure_id: String,
    pub n: usize,
    pub loss_nu: f64,
    pub loss_rho: f64,
    pub loss_rho_prime: f64,
    pub bound_rhs: f64,
    /// Smallest slack of the two checks; negative means a violation.
    pub margin: f64,
    pub pass: bool,
}

fn slack(loss_nu: f64, loss_ref: f64, allowance: f64) -> f64 {
    if loss_ref == f64::INFINITY {
        f64::INFINITY
    } else {
        allowance - (loss_nu - loss_ref)
    }
}

impl RegretReport {
    fn new(measure_id: String, n: usize, losses: [f64; 3], rhs: f64) -> Self {
        let [loss_nu, loss_rho, loss_rho_prime] = losses;
        let margin = slack(loss_nu, loss_rho_prime, rhs).min(slack(loss_nu, loss_rho, rhs + 1.0));
        RegretReport { measure_id, n, loss_nu, loss_rho, loss_rho_prime, bound_rhs: rhs, margin, pass: margin >= 0.0 }
    }
}

/// Exact `Lₙ(μ, q)` for every member `μ` and each `q` in `refs`, in one pass.
pub fn class_losses(class: &ModelClass, refs: &[&Measure], n: usize, budget: u64) -> Result<Vec<Vec<f64>>> {
    let members = class.len();
    let mut measures: Vec<&Measure> = class.measures().iter().collect();
    measures.extend_from_slice(refs);
    let ev = Evaluator::new(&measures)?;
    let width = refs.len();
    let flat = ev.fold(
        n,
        budget,
        || vec![0.0; members * width],
        |acc, _, logs| {
            for m in 0..members {
                let lm = logs[m];
                if lm == f64::NEG_INFINITY {
                    continue;
                }
                for r in 0..width {
                    acc[m * width + r] += kl_term(lm, logs[members + r]);
                }
            }
        },
        |mut a, b| {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
            a
        },
    )?;
    Ok(flat.chunks(width).map(|c| c.iter().map(|&v| if v < 0.0 && v > -1e-9 { 0.0 } else { v }).collect()).collect())
}

/// Checks a given prior against `ρ` for every member and `3 ≤ n ≤ max_n`.
/// Rows are ordered by member, then horizon.
pub fn verify_prior(prior: &DiscretePrior, rho: &Measure, max_n: usize, budget: u64) -> Result<Vec<RegretReport>> {
    if max_n < 3 {
        return Err(Error::invalid("N must be >= 3"));
    }
    let class = prior.class();
    let nu = prior.measure()?;
    let rho_prime = mix_with_uniform(rho);
    let bits = class.alphabet().bits();
    let per_n: Vec<Vec<Vec<f64>>> = (3..=max_n)
        .into_par_iter()
        .map(|n| class_losses(class, &[nu, rho, &rho_prime], n, budget))
        .collect::<Result<_>>()?;
    let mut reports = Vec::with_capacity(class.len() * per_n.len());
    for (m, measure) in class.measures().iter().enumerate() {
        for (offset, losses) in per_n.iter().enumerate() {
            let n = offset + 3;
            let l = &losses[m];
            reports.push(RegretReport::new(measure.id().to_owned(), n, [l[0], l[1], l[2]], bound_rhs(n, bits)?));
        }
    }
    Ok(reports)
}

/// Builds the prior for `(C, ρ, N)` and verifies it.
pub fn verify_class(class: &ModelClass, rho: &Measure, max_n: usize, budget: u64) -> Result<Vec<RegretReport>> {
    let construction = build_construction(class, rho, max_n, budget)?;
    verify_prior(&construction.prior, rho, max_n, budget)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

fn num(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v:?}")
    }
}

pub const REPORT_HEADER: &str =
    "measure_id,n,loss_nu_bits,loss_rho_bits,loss_rho_prime_bits,bound_rhs_bits,margin_bits,pass";

/// One CSV row per report, with header.
pub fn reports_to_csv(reports: &[RegretReport]) -> String {
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for r in reports {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            csv_field(&r.measure_id),
            r.n,
            num(r.loss_nu),
            num(r.loss_rho),
            num(r.loss_rho_prime),
            num(r.bound_rhs),
            num(r.margin),
            r.pass
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alphabet::Alphabet;
    use crate::enumerate::DEFAULT_BUDGET;

    #[test]
    fn rhs_rejects_small_horizons() {
        assert!(bound_rhs(2, 1.0).is_err());
        assert!(bound_rhs(3, 1.0).is_ok());
    }

    #[test]
    fn rhs_is_finite_and_positive_across_range() {
        let mut n = 3usize;
        while n <= 1 << 20 {
            let v = bound_rhs(n, 1.0).unwrap();
            assert!(v.is_finite() && v > 0.0, "n = {n}: {v}");
            n = n * 3 / 2 + 1;
        }
        assert!(bound_rhs(1 << 20, 1.0).unwrap().is_finite());
    }

    #[test]
    fn singleton_class_passes() {
        let rho = Measure::bernoulli(0.3).unwrap();
        let class = ModelClass::new(Alphabet::BINARY, "rho", vec![rho.clone()]).unwrap();
        let reports = verify_class(&class, &rho, 6, DEFAULT_BUDGET).unwrap();
        assert_eq!(reports.len(), 4);
        assert!(reports.iter().all(|r| r.pass && r.loss_nu.is_finite()));
    }

    #[test]
    fn csv_quotes_ids_with_commas() {
        let r = RegretReport::new("markov1[0.2,0.8]".into(), 3, [1.0, 2.0, 2.5], 30.0);
        let csv = reports_to_csv(&[r]);
        let line = csv.lines().nth(1).unwrap();
        assert!(line.starts_with("\"markov1[0.2,0.8]\",3,1.0,2.0,2.5,30.0,"));
        assert!(line.ends_with(",true"));
    }

    #[test]
    fn infinite_reference_loss_does_not_fail_its_check() {
        let r = RegretReport::new("m".into(), 3, [5.0, f64::INFINITY, 4.0], 10.0);
        assert!(r.pass);
        assert_eq!(r.margin, 9.0);
    }
}
