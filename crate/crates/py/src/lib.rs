//! Python bindings: measures, model classes, the mixture prior, exact and
//! sampled losses, the regret bound and the lower-bound witness search.
//!
//! Strings are lists of integer symbols. Probabilities are returned as
//! floats; report rows as dicts.

use mixpred_core::adversary::{preset_prior, theta_curve, PresetPrior, Witness};
use mixpred_core::bound::{verify_prior, RegretReport};
use mixpred_core::loss::{cumulative_kl_with_budget, mc_loss as core_mc_loss, predict_next};
use mixpred_core::prior::build_construction;
use mixpred_core::{Alphabet, DiscretePrior, Error, Measure, MeasureSpec, ModelClass, Symbol, DEFAULT_BUDGET};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(mixpred, MixpredError, PyException);
create_exception!(mixpred, BudgetError, MixpredError);
create_exception!(mixpred, InconsistentError, MixpredError);

fn to_py(err: Error) -> PyErr {
    match err {
        Error::BudgetExceeded { .. } => BudgetError::new_err(err.to_string()),
        Error::Inconsistent(_) => InconsistentError::new_err(err.to_string()),
        Error::InvalidInput(_) | Error::SymbolOutOfRange { .. } => PyValueError::new_err(err.to_string()),
        Error::UndefinedConditional => MixpredError::new_err(err.to_string()),
    }
}

trait IntoPy<T> {
    fn py_err(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for mixpred_core::Result<T> {
    fn py_err(self) -> PyResult<T> {
        self.map_err(to_py)
    }
}

// ---------------------------------------------------------------------------
// Measure
// ---------------------------------------------------------------------------

/// A process measure over a finite alphabet.
#[pyclass(name = "Measure", module = "mixpred", frozen)]
struct PyMeasure {
    inner: Measure,
}

#[pymethods]
impl PyMeasure {
    /// Builds a measure from a JSON spec such as `{"kind": "bernoulli", "p": 0.3}`.
    #[staticmethod]
    #[pyo3(signature = (spec, alphabet_size = 2))]
    fn from_json(spec: &str, alphabet_size: usize) -> PyResult<Self> {
        let spec: MeasureSpec = serde_json::from_str(spec).map_err(|e| PyValueError::new_err(e.to_string()))?;
        let alphabet = Alphabet::new(alphabet_size).py_err()?;
        Ok(PyMeasure { inner: Measure::from_spec(&spec, alphabet).py_err()? })
    }

    #[staticmethod]
    fn bernoulli(p: f64) -> PyResult<Self> {
        Ok(PyMeasure { inner: Measure::bernoulli(p).py_err()? })
    }

    #[staticmethod]
    #[pyo3(signature = (alphabet_size = 2))]
    fn uniform(alphabet_size: usize) -> PyResult<Self> {
        Ok(PyMeasure { inner: Measure::uniform(Alphabet::new(alphabet_size).py_err()?) })
    }

    #[getter]
    fn id(&self) -> &str {
        self.inner.id()
    }

    #[getter]
    fn alphabet_size(&self) -> usize {
        self.inner.alphabet().size()
    }

    fn to_json(&self) -> String {
        serde_json::to_string(self.inner.spec()).expect("measure specs serialize")
    }

    /// `μ(x₁..xₙ)`.
    fn marginal(&self, x: Vec<Symbol>) -> PyResult<f64> {
        Ok(self.inner.marginal(&x).py_err()?.prob())
    }

    /// `log₂ μ(x₁..xₙ)`; `-inf` for strings of zero probability.
    fn log2_marginal(&self, x: Vec<Symbol>) -> PyResult<f64> {
        Ok(self.inner.marginal(&x).py_err()?.log2())
    }

    /// `μ(a | prefix)`.
    fn conditional(&self, prefix: Vec<Symbol>, a: Symbol) -> PyResult<f64> {
        Ok(self.inner.conditional(&prefix, a).py_err()?.prob())
    }

    fn sample(&self, n: usize, seed: u64) -> Vec<Symbol> {
        self.inner.sample(n, seed)
    }

    fn __repr__(&self) -> String {
        format!("Measure({})", self.inner.id())
    }
}

// ---------------------------------------------------------------------------
// ModelClass
// ---------------------------------------------------------------------------

/// An ordered list of measures with unique identities.
#[pyclass(name = "ModelClass", module = "mixpred", frozen)]
struct PyModelClass {
    inner: ModelClass,
}

#[pymethods]
impl PyModelClass {
    /// Accepts a class spec (any family) or a class file.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyModelClass { inner: ModelClass::from_json(text).py_err()? })
    }

    #[staticmethod]
    fn from_measures(measures: Vec<PyRef<'_, PyMeasure>>, description: &str) -> PyResult<Self> {
        let measures: Vec<Measure> = measures.iter().map(|m| m.inner.clone()).collect();
        let alphabet = measures.first().map(|m| m.alphabet()).unwrap_or(Alphabet::BINARY);
        Ok(PyModelClass { inner: ModelClass::new(alphabet, description, measures).py_err()? })
    }

    #[getter]
    fn description(&self) -> &str {
        self.inner.description()
    }

    #[getter]
    fn alphabet_size(&self) -> usize {
        self.inner.alphabet().size()
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __getitem__(&self, index: isize) -> PyResult<PyMeasure> {
        let len = self.inner.len() as isize;
        let i = if index < 0 { index + len } else { index };
        if !(0..len).contains(&i) {
            return Err(pyo3::exceptions::PyIndexError::new_err("class index out of range"));
        }
        Ok(PyMeasure { inner: self.inner.get(i as usize).clone() })
    }

    fn __repr__(&self) -> String {
        format!("ModelClass({}, {} measures)", self.inner.description(), self.inner.len())
    }
}

// ---------------------------------------------------------------------------
// Prior
// ---------------------------------------------------------------------------

fn report_dict<'py>(py: Python<'py>, r: &RegretReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("measure_id", &r.measure_id)?;
    d.set_item("n", r.n)?;
    d.set_item("loss_nu_bits", r.loss_nu)?;
    d.set_item("loss_rho_bits", r.loss_rho)?;
    d.set_item("loss_rho_prime_bits", r.loss_rho_prime)?;
    d.set_item("bound_rhs_bits", r.bound_rhs)?;
    d.set_item("margin_bits", r.margin)?;
    d.set_item("pass", r.pass)?;
    Ok(d)
}

fn witness_dict<'py>(py: Python<'py>, w: &Witness) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("n", w.n)?;
    d.set_item("witness_prefix", &w.witness_prefix)?;
    d.set_item("W_n", w.w_n)?;
    d.set_item("guarantee_bits", w.guarantee_bits)?;
    d.set_item("actual_regret_bits", w.actual_regret_bits)?;
    d.set_item("nu_mass", w.nu_mass)?;
    d.set_item("u_mass", w.u_mass)?;
    Ok(d)
}

/// A countable mixture `ν = Σ wᵢ μᵢ` over members of a class.
#[pyclass(name = "Prior", module = "mixpred", frozen)]
struct PyPrior {
    inner: DiscretePrior,
    /// Covering weight when built by `construct`.
    covering_mass: Option<f64>,
}

#[pymethods]
impl PyPrior {
    /// Builds the mixture prior for `class` against the reference `rho` up to horizon `max_n`.
    #[staticmethod]
    #[pyo3(signature = (class_, rho, max_n, budget = DEFAULT_BUDGET))]
    fn construct(
        py: Python<'_>,
        class_: PyRef<'_, PyModelClass>,
        rho: PyRef<'_, PyMeasure>,
        max_n: usize,
        budget: u64,
    ) -> PyResult<Self> {
        let (class, rho) = (&class_.inner, &rho.inner);
        let c = py.detach(|| build_construction(class, rho, max_n, budget)).py_err()?;
        Ok(PyPrior { covering_mass: Some(c.covering_mass), inner: c.prior })
    }

    /// Prior with the given weight on each member of `class_`.
    #[staticmethod]
    fn from_weights(class_: PyRef<'_, PyModelClass>, weights: Vec<f64>) -> PyResult<Self> {
        let inner = DiscretePrior::from_member_weights(class_.inner.clone(), &weights).py_err()?;
        Ok(PyPrior { inner, covering_mass: None })
    }

    #[staticmethod]
    fn from_dump(json: &str, class_: PyRef<'_, PyModelClass>) -> PyResult<Self> {
        Ok(PyPrior { inner: DiscretePrior::from_dump_json(json, &class_.inner).py_err()?, covering_mass: None })
    }

    /// Built-in prior over point masses on sequences that are zero after position `k`:
    /// "uniform", "geometric" or "single-delta".
    #[staticmethod]
    fn preset(name: &str, k: usize) -> PyResult<Self> {
        let preset: PresetPrior = name.parse().py_err()?;
        Ok(PyPrior { inner: preset_prior(preset, k).py_err()?, covering_mass: None })
    }

    fn to_dump(&self) -> String {
        self.inner.to_dump_json()
    }

    #[getter]
    fn class_(&self) -> PyModelClass {
        PyModelClass { inner: self.inner.class().clone() }
    }

    #[getter]
    fn covering_mass(&self) -> Option<f64> {
        self.covering_mass
    }

    #[getter]
    fn num_components(&self) -> usize {
        self.inner.components().len()
    }

    fn member_weights(&self) -> Vec<f64> {
        self.inner.member_weights()
    }

    /// The mixture as a measure.
    fn measure(&self) -> PyResult<PyMeasure> {
        Ok(PyMeasure { inner: self.inner.measure().py_err()?.clone() })
    }

    /// `ν(· | prefix)` as a list over the alphabet.
    fn predict_next(&self, prefix: Vec<Symbol>) -> PyResult<Vec<f64>> {
        predict_next(&self.inner, &prefix).py_err()
    }

    /// One report row per member and horizon `3 ≤ n ≤ max_n`.
    #[pyo3(signature = (rho, max_n, budget = DEFAULT_BUDGET))]
    fn verify<'py>(
        &self,
        py: Python<'py>,
        rho: PyRef<'_, PyMeasure>,
        max_n: usize,
        budget: u64,
    ) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let (prior, rho) = (&self.inner, &rho.inner);
        let reports = py.detach(|| verify_prior(prior, rho, max_n, budget)).py_err()?;
        reports.iter().map(|r| report_dict(py, r)).collect()
    }

    /// Witness rows for `n = 1..k-1`; the prior must be over point masses.
    #[pyo3(signature = (k = None))]
    fn lower_bound<'py>(&self, py: Python<'py>, k: Option<usize>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let k = match k {
            Some(k) => k,
            None => mixpred_core::adversary::DiracClassIndex::from_class(self.inner.class()).py_err()?.k,
        };
        let prior = &self.inner;
        let rows = py.detach(|| theta_curve(prior, k)).py_err()?;
        rows.iter().map(|w| witness_dict(py, w)).collect()
    }

    fn __repr__(&self) -> String {
        format!("Prior({} components over {})", self.inner.components().len(), self.inner.class().description())
    }
}

// ---------------------------------------------------------------------------
// Functions
// ---------------------------------------------------------------------------

/// Exact `Lₙ(μ, ρ)` in bits.
#[pyfunction]
#[pyo3(signature = (mu, rho, n, budget = DEFAULT_BUDGET))]
fn cumulative_kl(
    py: Python<'_>,
    mu: PyRef<'_, PyMeasure>,
    rho: PyRef<'_, PyMeasure>,
    n: usize,
    budget: u64,
) -> PyResult<f64> {
    let (mu, rho) = (&mu.inner, &rho.inner);
    Ok(py.detach(|| cumulative_kl_with_budget(mu, rho, n, budget)).py_err()?.bits())
}

/// Monte Carlo estimate of `Lₙ(μ, ρ)`: dict with `mean`, `std_error`, `samples`, `seed`.
#[pyfunction]
fn mc_loss<'py>(
    py: Python<'py>,
    mu: PyRef<'_, PyMeasure>,
    rho: PyRef<'_, PyMeasure>,
    n: usize,
    samples: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let (mu, rho) = (&mu.inner, &rho.inner);
    let est = py.detach(|| core_mc_loss(mu, rho, n, samples, seed)).py_err()?;
    let d = PyDict::new(py);
    d.set_item("mean", est.mean)?;
    d.set_item("std_error", est.std_error)?;
    d.set_item("samples", est.sample_count)?;
    d.set_item("seed", est.seed)?;
    Ok(d)
}

/// Right-hand side of the regret bound at horizon `n` for an alphabet of `bits = log₂|X|`.
#[pyfunction]
#[pyo3(signature = (n, bits = 1.0))]
fn bound_rhs(n: usize, bits: f64) -> PyResult<f64> {
    mixpred_core::bound_rhs(n, bits).py_err()
}

#[pymodule]
fn mixpred(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMeasure>()?;
    m.add_class::<PyModelClass>()?;
    m.add_class::<PyPrior>()?;
    m.add_function(wrap_pyfunction!(cumulative_kl, m)?)?;
    m.add_function(wrap_pyfunction!(mc_loss, m)?)?;
    m.add_function(wrap_pyfunction!(bound_rhs, m)?)?;
    m.add("MixpredError", m.py().get_type::<MixpredError>())?;
    m.add("BudgetError", m.py().get_type::<BudgetError>())?;
    m.add("InconsistentError", m.py().get_type::<InconsistentError>())?;
    m.add("DEFAULT_BUDGET", DEFAULT_BUDGET)?;
    Ok(())
}
