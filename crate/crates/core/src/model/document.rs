//! JSON schema for scenario files.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::function::FunctionSpec;
use super::scenario::{build_scenario, Fairness, Scenario};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDocument {
    pub targets: Vec<String>,
    pub sources: Vec<String>,
    pub edges: Vec<EdgeDocument>,
    pub bounds: BoundsDocument,
    #[serde(default)]
    pub fairness: BTreeMap<String, FairnessDocument>,
    pub horizon: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeDocument {
    pub target: String,
    pub source: String,
    pub d: FunctionSpec,
    pub s: FunctionSpec,
    pub c: FunctionSpec,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsDocument {
    pub targets: BTreeMap<String, TargetBounds>,
    pub sources: BTreeMap<String, SourceBounds>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetBounds {
    pub p_lo: f64,
    pub p_hi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceBounds {
    pub q_lo: f64,
    pub q_hi: f64,
}

fn default_fairness_function() -> FunctionSpec {
    Fairness::DEFAULT_FUNCTION
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FairnessDocument {
    pub weight: f64,
    #[serde(default = "default_fairness_function")]
    pub function: FunctionSpec,
}

impl ScenarioDocument {
    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|source| Error::Parse {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario documents always serialize")
    }
}

/// Reads and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    build_scenario(&ScenarioDocument::read(path)?)
}

/// Incremental construction of scenario documents, mostly for tests and
/// generated instances.
#[derive(Debug, Clone)]
pub struct ScenarioBuilder {
    doc: ScenarioDocument,
}

impl ScenarioBuilder {
    pub fn new(horizon: usize) -> Self {
        Self {
            doc: ScenarioDocument {
                targets: Vec::new(),
                sources: Vec::new(),
                edges: Vec::new(),
                bounds: BoundsDocument::default(),
                fairness: BTreeMap::new(),
                horizon,
            },
        }
    }

    pub fn target(mut self, id: &str, p_lo: f64, p_hi: f64, weight: f64) -> Self {
        self.doc.targets.push(id.to_owned());
        self.doc
            .bounds
            .targets
            .insert(id.to_owned(), TargetBounds { p_lo, p_hi });
        self.doc.fairness.insert(
            id.to_owned(),
            FairnessDocument {
                weight,
                function: Fairness::DEFAULT_FUNCTION,
            },
        );
        self
    }

    pub fn source(mut self, id: &str, q_lo: f64, q_hi: f64) -> Self {
        self.doc.sources.push(id.to_owned());
        self.doc
            .bounds
            .sources
            .insert(id.to_owned(), SourceBounds { q_lo, q_hi });
        self
    }

    pub fn edge(
        mut self,
        target: &str,
        source: &str,
        d: FunctionSpec,
        s: FunctionSpec,
        c: FunctionSpec,
    ) -> Self {
        self.doc.edges.push(EdgeDocument {
            target: target.to_owned(),
            source: source.to_owned(),
            d,
            s,
            c,
        });
        self
    }

    pub fn linear_edge(self, target: &str, source: &str, d: f64, s: f64, c: f64) -> Self {
        self.edge(
            target,
            source,
            FunctionSpec::linear(d),
            FunctionSpec::linear(s),
            FunctionSpec::linear(c),
        )
    }

    pub fn document(&self) -> &ScenarioDocument {
        &self.doc
    }

    pub fn into_document(self) -> ScenarioDocument {
        self.doc
    }

    pub fn build(&self) -> Result<Scenario> {
        build_scenario(&self.doc)
    }
}
