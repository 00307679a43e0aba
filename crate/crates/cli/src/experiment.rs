//! Experiment settings: a JSON file given with `--spec`, overridden field by
//! field from the command line.
//!
//! ```json
//! {
//!   "class": {"family": "bernoulli-grid", "alphabet_size": 2, "grid": {"resolution": 10}},
//!   "reference": {"kind": "bernoulli", "p": 0.5},
//!   "max_n": 12,
//!   "budget": 16777216,
//!   "seed": 7,
//!   "samples": 100000,
//!   "monte_carlo": false
//! }
//! ```
//!
//! `class_file` may replace `class` with a path to a class file; relative
//! paths are taken from the directory of the spec file.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use mixpred_core::enumerate::DEFAULT_BUDGET;
use mixpred_core::{build_class, ClassSpec, Error, Measure, MeasureSpec, ModelClass};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<ClassSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<MeasureSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default)]
    pub monte_carlo: bool,
}

fn input_error(msg: impl Into<String>) -> anyhow::Error {
    Error::InvalidInput(msg.into()).into()
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| input_error(format!("{}: {e}", path.display())))
}

/// Parses JSON, reporting failures as input errors.
pub fn parse_json<T: serde::de::DeserializeOwned>(text: &str, what: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| input_error(format!("{what}: {e}")))
}

impl ExperimentSpec {
    pub fn load(path: &Path) -> Result<Self> {
        let mut spec: ExperimentSpec = parse_json(&read_text(path)?, &path.display().to_string())?;
        if let Some(file) = &spec.class_file {
            if file.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                spec.class_file = Some(base.join(file));
            }
        }
        Ok(spec)
    }

    pub fn budget(&self) -> u64 {
        self.budget.unwrap_or(DEFAULT_BUDGET)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn samples(&self) -> usize {
        self.samples.unwrap_or(100_000)
    }

    pub fn max_n(&self) -> Result<usize> {
        let n = self.max_n.ok_or_else(|| input_error("the horizon N is required (--max-n or \"max_n\")"))?;
        if n < 3 {
            return Err(input_error(format!("N must be >= 3, got {n}")));
        }
        Ok(n)
    }

    pub fn class(&self) -> Result<ModelClass> {
        match (&self.class_file, &self.class) {
            (Some(path), _) => load_class(path),
            (None, Some(spec)) => Ok(build_class(spec)?),
            (None, None) => Err(input_error("no model class given (--class or \"class\")")),
        }
    }

    pub fn reference(&self, class: &ModelClass) -> Result<Measure> {
        let spec = self
            .reference
            .as_ref()
            .ok_or_else(|| input_error("no reference predictor given (--rho or \"reference\")"))?;
        Ok(Measure::from_spec(spec, class.alphabet())?)
    }

    /// Digest of the settings that determine the outputs.
    pub fn digest(&self, class: &ModelClass) -> String {
        let resolved = serde_json::json!({
            "class": class.to_json(),
            "reference": self.reference,
            "max_n": self.max_n,
            "budget": self.budget(),
            "seed": self.seed(),
            "samples": self.samples(),
            "monte_carlo": self.monte_carlo,
        });
        crate::output::sha256_hex(resolved.to_string().as_bytes())
    }
}

pub fn load_class(path: &Path) -> Result<ModelClass> {
    let text = read_text(path)?;
    ModelClass::from_json(&text).with_context(|| format!("loading class {}", path.display()))
}

/// `--rho` accepts inline JSON or a path to a JSON file.
pub fn parse_reference(arg: &str) -> Result<MeasureSpec> {
    let text = if arg.trim_start().starts_with('{') { arg.to_owned() } else { read_text(Path::new(arg))? };
    parse_json(&text, "reference")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_parses_and_resolves_class_path() {
        let dir = tempfile::tempdir().unwrap();
        let spec_path = dir.path().join("exp.json");
        std::fs::write(
            &spec_path,
            r#"{"class_file": "c.json", "reference": {"kind": "bernoulli", "p": 0.5}, "max_n": 5}"#,
        )
        .unwrap();
        let spec = ExperimentSpec::load(&spec_path).unwrap();
        assert_eq!(spec.class_file.as_deref(), Some(dir.path().join("c.json").as_path()));
        assert_eq!(spec.max_n().unwrap(), 5);
        assert_eq!(spec.budget(), DEFAULT_BUDGET);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(parse_json::<ExperimentSpec>(r#"{"horizon": 4}"#, "spec").is_err());
    }

    #[test]
    fn small_horizon_is_an_input_error() {
        let spec = ExperimentSpec { max_n: Some(2), ..Default::default() };
        let err = spec.max_n().unwrap_err();
        assert!(matches!(err.downcast_ref::<Error>(), Some(Error::InvalidInput(_))));
    }

    #[test]
    fn inline_reference() {
        let r = parse_reference(r#"{"kind": "bernoulli", "p": 0.25}"#).unwrap();
        assert_eq!(r, MeasureSpec::Bernoulli { p: 0.25 });
    }
}
