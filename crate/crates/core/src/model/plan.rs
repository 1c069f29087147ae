use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::scenario::Scenario;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EdgeKey {
    pub target: String,
    pub source: String,
}

impl EdgeKey {
    pub fn new(target: &str, source: &str) -> Self {
        Self {
            target: target.to_owned(),
            source: source.to_owned(),
        }
    }
}

impl fmt::Display for EdgeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.target, self.source)
    }
}

/// Transported amounts keyed by `(edge, period)`.
///
/// Amounts are stored edge-major in the same layout as
/// [`Scenario::var_index`], so a plan built for a scenario can be handed to
/// the solvers without reindexing.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    keys: Vec<EdgeKey>,
    horizon: usize,
    amounts: Vec<f64>,
}

impl TransportPlan {
    pub fn zeros(scenario: &Scenario) -> Self {
        Self {
            keys: scenario.edge_keys(),
            horizon: scenario.horizon(),
            amounts: vec![0.0; scenario.n_vars()],
        }
    }

    /// Wraps raw amounts laid out as in `scenario`. Tiny negative values from
    /// floating-point rounding are clamped to zero.
    pub fn from_amounts(scenario: &Scenario, amounts: Vec<f64>) -> Result<Self> {
        if amounts.len() != scenario.n_vars() {
            return Err(Error::KeyMismatch(format!(
                "expected {} amounts, got {}",
                scenario.n_vars(),
                amounts.len()
            )));
        }
        let mut amounts = amounts;
        for (i, a) in amounts.iter_mut().enumerate() {
            if !a.is_finite() || *a < -1e-9 {
                return Err(Error::KeyMismatch(format!(
                    "amount at index {i} is not a nonnegative number: {a}"
                )));
            }
            *a = a.max(0.0);
        }
        Ok(Self {
            keys: scenario.edge_keys(),
            horizon: scenario.horizon(),
            amounts,
        })
    }

    pub fn keys(&self) -> &[EdgeKey] {
        &self.keys
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn amounts(&self) -> &[f64] {
        &self.amounts
    }

    pub fn into_amounts(self) -> Vec<f64> {
        self.amounts
    }

    pub fn len(&self) -> usize {
        self.amounts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amounts.is_empty()
    }

    /// Amount on edge index `e` in 0-based period `t`.
    pub fn get(&self, e: usize, t: usize) -> f64 {
        self.amounts[e * self.horizon + t]
    }

    /// Amount for an edge key and 0-based period.
    pub fn amount(&self, key: &EdgeKey, t: usize) -> Option<f64> {
        let e = self.keys.iter().position(|k| k == key)?;
        (t < self.horizon).then(|| self.get(e, t))
    }

    /// Fails unless the plan is keyed exactly on the scenario's `E x {1..T}`.
    pub fn check_aligned(&self, scenario: &Scenario) -> Result<()> {
        if self.horizon != scenario.horizon() {
            return Err(Error::KeyMismatch(format!(
                "plan horizon {} vs scenario horizon {}",
                self.horizon,
                scenario.horizon()
            )));
        }
        let expected = scenario.edge_keys();
        if self.keys != expected {
            return Err(Error::KeyMismatch(
                "plan edges differ from scenario edges".to_owned(),
            ));
        }
        Ok(())
    }

    /// Fails unless both plans share keys and horizon.
    pub fn check_same_keys(&self, other: &TransportPlan) -> Result<()> {
        if self.horizon != other.horizon || self.keys != other.keys {
            return Err(Error::KeyMismatch(
                "plans are keyed on different edges or horizons".to_owned(),
            ));
        }
        Ok(())
    }

    /// Largest absolute entrywise difference.
    pub fn sup_distance(&self, other: &TransportPlan) -> Result<f64> {
        self.check_same_keys(other)?;
        Ok(self
            .amounts
            .iter()
            .zip(&other.amounts)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    pub fn to_document(&self) -> PlanDocument {
        let mut entries = Vec::with_capacity(self.amounts.len());
        for (e, key) in self.keys.iter().enumerate() {
            for t in 0..self.horizon {
                entries.push(PlanEntry {
                    target: key.target.clone(),
                    source: key.source.clone(),
                    period: t + 1,
                    amount: self.get(e, t),
                });
            }
        }
        PlanDocument {
            horizon: self.horizon,
            entries,
        }
    }

    /// Rebuilds a plan from its file form, aligned to `scenario`.
    pub fn from_document(doc: &PlanDocument, scenario: &Scenario) -> Result<Self> {
        if doc.horizon != scenario.horizon() {
            return Err(Error::KeyMismatch(format!(
                "plan horizon {} vs scenario horizon {}",
                doc.horizon,
                scenario.horizon()
            )));
        }
        let keys = scenario.edge_keys();
        let mut amounts = vec![f64::NAN; scenario.n_vars()];
        for entry in &doc.entries {
            let key = EdgeKey::new(&entry.target, &entry.source);
            let e = keys
                .iter()
                .position(|k| *k == key)
                .ok_or_else(|| Error::KeyMismatch(format!("unknown edge {key}")))?;
            if entry.period == 0 || entry.period > doc.horizon {
                return Err(Error::KeyMismatch(format!(
                    "period {} out of range for edge {key}",
                    entry.period
                )));
            }
            let slot = &mut amounts[scenario.var_index(e, entry.period - 1)];
            if !slot.is_nan() {
                return Err(Error::KeyMismatch(format!(
                    "duplicate entry for edge {key} period {}",
                    entry.period
                )));
            }
            *slot = entry.amount;
        }
        if amounts.iter().any(|a| a.is_nan()) {
            return Err(Error::KeyMismatch(
                "plan file misses some (edge, period) keys".into(),
            ));
        }
        Self::from_amounts(scenario, amounts)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanDocument {
    pub horizon: usize,
    pub entries: Vec<PlanEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanEntry {
    pub target: String,
    pub source: String,
    /// 1-based period.
    pub period: usize,
    pub amount: f64,
}

impl PlanDocument {
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| Error::Parse {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = serde_json::to_string_pretty(self).expect("plans always serialize");
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}
