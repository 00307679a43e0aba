use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{Measure, MeasureSpec, Segment};
use crate::alphabet::{Alphabet, Symbol};
use crate::error::{Error, Result};

/// Upper limit on the number of measures a family may expand into.
const MAX_CLASS_SIZE: usize = 1 << 20;

/// JSON description of a model class: `{"family": .., "alphabet_size": .., params..}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSpec {
    pub alphabet_size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(flatten)]
    pub family: Family,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Family {
    /// Binary i.i.d. measures, one per grid value.
    BernoulliGrid { grid: ParamGrid },
    /// Binary Markov chains of the given order; every context draws `P(1|ctx)`
    /// from the grid independently.
    MarkovGrid { order: usize, grid: ParamGrid },
    /// Binary piecewise-i.i.d. processes. Segments are delimited by the change
    /// times (1-based time of the first symbol of a new segment); each segment
    /// draws its parameter from the grid. With `all_subsets`, every subset of
    /// the change times is enumerated as well.
    ChangePoint {
        change_times: Vec<usize>,
        grid: ParamGrid,
        #[serde(default)]
        all_subsets: bool,
    },
    /// Point masses on every sequence that equals `tail` after position `k`.
    DiracUptoK {
        k: usize,
        #[serde(default)]
        tail: Symbol,
    },
    /// Explicit list of measures.
    Custom { measures: Vec<MeasureSpec> },
}

/// Grid of parameters in (0, 1): either explicit values or `i / resolution`
/// for `i = 1..resolution`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamGrid {
    Values(Vec<f64>),
    Resolution { resolution: u32 },
}

impl ParamGrid {
    pub fn values(&self) -> Result<Vec<f64>> {
        let values: Vec<f64> = match self {
            ParamGrid::Values(v) => v.clone(),
            ParamGrid::Resolution { resolution } => {
                let r = *resolution;
                (1..r).map(|i| i as f64 / r as f64).collect()
            }
        };
        if values.is_empty() {
            return Err(Error::invalid("parameter grid is empty"));
        }
        if let Some(bad) = values.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
            return Err(Error::invalid(format!("grid value {bad} is outside (0, 1)")));
        }
        Ok(values)
    }
}

/// An ordered, non-empty list of measures with unique identities.
#[derive(Debug, Clone)]
pub struct ModelClass {
    alphabet: Alphabet,
    description: String,
    measures: Vec<Measure>,
}

impl ModelClass {
    pub fn new(alphabet: Alphabet, description: impl Into<String>, measures: Vec<Measure>) -> Result<Self> {
        if measures.is_empty() {
            return Err(Error::invalid("model class is empty"));
        }
        let mut seen = HashSet::new();
        for m in &measures {
            if m.alphabet() != alphabet {
                return Err(Error::invalid(format!("{} uses a different alphabet", m.id())));
            }
            if !seen.insert(m.id().to_owned()) {
                return Err(Error::invalid(format!("duplicate measure {}", m.id())));
            }
        }
        Ok(ModelClass { alphabet, description: description.into(), measures })
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn measures(&self) -> &[Measure] {
        &self.measures
    }

    pub fn len(&self) -> usize {
        self.measures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measures.is_empty()
    }

    pub fn get(&self, index: usize) -> &Measure {
        &self.measures[index]
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.measures.iter().position(|m| m.id() == id)
    }

    /// Canonical form: a `custom` spec listing every member explicitly.
    pub fn to_spec(&self) -> ClassSpec {
        ClassSpec {
            alphabet_size: self.alphabet.size(),
            description: Some(self.description.clone()),
            family: Family::Custom { measures: self.measures.iter().map(|m| m.spec().clone()).collect() },
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_spec()).expect("class spec serializes")
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let spec: ClassSpec = serde_json::from_str(json)?;
        build_class(&spec)
    }
}

fn require_binary(alphabet: Alphabet, family: &str) -> Result<()> {
    if alphabet.size() != 2 {
        return Err(Error::invalid(format!("{family} needs alphabet_size 2")));
    }
    Ok(())
}

/// Expands `grid^count` assignments in lexicographic order.
fn assignments(grid: &[f64], count: usize) -> Result<Vec<Vec<f64>>> {
    let total = grid
        .len()
        .checked_pow(count as u32)
        .filter(|&t| t <= MAX_CLASS_SIZE)
        .ok_or_else(|| Error::invalid("class would exceed the size limit"))?;
    Ok((0..total)
        .map(|mut idx| {
            let mut row = vec![0.0; count];
            for slot in row.iter_mut().rev() {
                *slot = grid[idx % grid.len()];
                idx /= grid.len();
            }
            row
        })
        .collect())
}

fn default_description(spec: &ClassSpec) -> String {
    match &spec.family {
        Family::BernoulliGrid { .. } => "bernoulli-grid".into(),
        Family::MarkovGrid { order, .. } => format!("markov-grid order {order}"),
        Family::ChangePoint { change_times, .. } => format!("change-point at {change_times:?}"),
        Family::DiracUptoK { k, .. } => format!("dirac-upto-{k}"),
        Family::Custom { .. } => "custom".into(),
    }
}

/// Builds the ordered class described by `spec`.
pub fn build_class(spec: &ClassSpec) -> Result<ModelClass> {
    let alphabet = Alphabet::new(spec.alphabet_size)?;
    let measures: Vec<Measure> = match &spec.family {
        Family::BernoulliGrid { grid } => {
            require_binary(alphabet, "bernoulli-grid")?;
            grid.values()?.into_iter().map(Measure::bernoulli).collect::<Result<_>>()?
        }
        Family::MarkovGrid { order, grid } => {
            require_binary(alphabet, "markov-grid")?;
            let contexts = 1usize
                .checked_shl(*order as u32)
                .filter(|&c| c <= 64)
                .ok_or_else(|| Error::invalid("markov-grid order too large"))?;
            assignments(&grid.values()?, contexts)?
                .into_iter()
                .map(|row| {
                    let probs = row.iter().map(|&p| vec![1.0 - p, p]).collect();
                    Measure::from_spec(&MeasureSpec::Markov { order: *order, probs }, alphabet)
                })
                .collect::<Result<_>>()?
        }
        Family::ChangePoint { change_times, grid, all_subsets } => {
            require_binary(alphabet, "change-point")?;
            let mut times = change_times.clone();
            times.sort_unstable();
            times.dedup();
            if times.iter().any(|&t| t < 2) {
                return Err(Error::invalid("change times must be at least 2"));
            }
            if times.len() > 16 {
                return Err(Error::invalid("too many change times"));
            }
            let grid = grid.values()?;
            let subsets: Vec<Vec<usize>> = if *all_subsets {
                (0..1usize << times.len())
                    .map(|mask| times.iter().enumerate().filter(|(j, _)| mask >> j & 1 == 1).map(|(_, &t)| t).collect())
                    .collect()
            } else {
                vec![times]
            };
            let mut out = Vec::new();
            for subset in subsets {
                let starts: Vec<usize> = std::iter::once(1).chain(subset).collect();
                for params in assignments(&grid, starts.len())? {
                    let segments = starts
                        .iter()
                        .zip(&params)
                        .map(|(&start, &p)| Segment { start, probs: vec![1.0 - p, p] })
                        .collect();
                    out.push(Measure::from_spec(&MeasureSpec::ChangePoint { segments }, alphabet)?);
                }
                if out.len() > MAX_CLASS_SIZE {
                    return Err(Error::invalid("class would exceed the size limit"));
                }
            }
            out
        }
        Family::DiracUptoK { k, tail } => {
            alphabet.check(&[*tail])?;
            let count = alphabet
                .strings(*k)
                .filter(|&c| c <= MAX_CLASS_SIZE as u128)
                .ok_or_else(|| Error::invalid("dirac class would exceed the size limit"))?;
            (0..count as usize)
                .map(|idx| Measure::dirac(alphabet, &alphabet.string_at(idx, *k), *tail))
                .collect::<Result<_>>()?
        }
        Family::Custom { measures } => {
            measures.iter().map(|m| Measure::from_spec(m, alphabet)).collect::<Result<_>>()?
        }
    };
    let description = spec.description.clone().unwrap_or_else(|| default_description(spec));
    ModelClass::new(alphabet, description, measures)
}
