//! Discrete-prior Bayesian prediction with a logarithmic regret guarantee.
//!
//! Given a finite class `C` of measures over `Xⁿ` and any reference predictor
//! `ρ`, [`prior::assemble_prior`] builds a discrete prior on `C` whose Bayes
//! mixture `ν` satisfies, for every `μ ∈ C` and `n ≥ 3`,
//!
//! ```text
//! Lₙ(μ,ν) − Lₙ(μ,ρ) ≤ bound_rhs(n) + 1,        Lₙ(μ,ρ) = Σ_x μ(x) log₂(μ(x)/ρ(x))
//! ```
//!
//! with `bound_rhs(n) = O(log n)`. [`bound`] verifies this by exact
//! enumeration, and [`adversary`] exhibits the matching lower bound over
//! point masses on eventually-zero sequences. All logarithms are base 2.

pub mod adversary;
pub mod alphabet;
pub mod bound;
pub mod enumerate;
pub mod error;
pub mod logprob;
pub mod loss;
pub mod measure;
pub mod prior;

pub use adversary::{adversarial_witness, mass_profile, theta_curve, PresetPrior, PriorMassProfile, Witness};
pub use alphabet::{Alphabet, Symbol};
pub use bound::{bound_rhs, reports_to_csv, verify_class, verify_prior, BoundConstants, RegretReport};
pub use enumerate::DEFAULT_BUDGET;
pub use error::{Error, Result};
pub use logprob::LogProb;
pub use loss::{cumulative_kl, mc_loss, predict_next, LossValue, McEstimate};
pub use measure::{build_class, ClassSpec, Measure, MeasureSpec, ModelClass};
pub use prior::{assemble_prior, build_construction, mix_with_uniform, Construction, DiscretePrior};
