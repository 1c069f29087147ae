//! Validated transport scenarios.
//!
//! Node ids are opaque strings at the file boundary and dense indices
//! internally. Decision variables are laid out edge-major: the amount on
//! edge `e` in period `t` (0-based) lives at `e * horizon + t`.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use log::warn;

use super::document::{
    BoundsDocument, EdgeDocument, FairnessDocument, ScenarioDocument, SourceBounds, TargetBounds,
};
use super::function::{FunctionSpec, Role};
use super::plan::EdgeKey;
use crate::error::{Error, Result, Violation};

/// Bipartite transport network. Edges are `(target, source)` index pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    targets: Vec<String>,
    sources: Vec<String>,
    edges: Vec<(usize, usize)>,
    target_edges: Vec<Vec<usize>>,
    source_edges: Vec<Vec<usize>>,
}

impl Network {
    pub fn targets(&self) -> &[String] {
        &self.targets
    }

    pub fn sources(&self) -> &[String] {
        &self.sources
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Edge indices incident to target `x`, in edge order.
    pub fn target_edges(&self, x: usize) -> &[usize] {
        &self.target_edges[x]
    }

    /// Edge indices incident to source `y`, in edge order.
    pub fn source_edges(&self, y: usize) -> &[usize] {
        &self.source_edges[y]
    }

    /// Sources adjacent to target `x`.
    pub fn suppliers_of(&self, x: usize) -> impl Iterator<Item = usize> + '_ {
        self.target_edges[x].iter().map(move |&e| self.edges[e].1)
    }

    /// Targets adjacent to source `y`.
    pub fn customers_of(&self, y: usize) -> impl Iterator<Item = usize> + '_ {
        self.source_edges[y].iter().map(move |&e| self.edges[e].0)
    }

    pub fn edge_key(&self, e: usize) -> EdgeKey {
        let (x, y) = self.edges[e];
        EdgeKey::new(&self.targets[x], &self.sources[y])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeBounds {
    pub lo: f64,
    pub hi: f64,
}

impl NodeBounds {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }
}

/// Sum bounds per node, accumulated over all periods and partners.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub targets: Vec<NodeBounds>,
    pub sources: Vec<NodeBounds>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeFunctions {
    /// Target utility.
    pub d: FunctionSpec,
    /// Source utility.
    pub s: FunctionSpec,
    /// Transport cost paid by the source.
    pub c: FunctionSpec,
}

impl EdgeFunctions {
    pub fn is_zero(&self) -> bool {
        self.d.is_zero() && self.s.is_zero() && self.c.is_zero()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fairness {
    pub weight: f64,
    pub function: FunctionSpec,
}

impl Fairness {
    pub const DEFAULT_FUNCTION: FunctionSpec = FunctionSpec::log(1.0);

    pub const fn with_weight(weight: f64) -> Self {
        Self {
            weight,
            function: Self::DEFAULT_FUNCTION,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    network: Network,
    bounds: Bounds,
    edge_functions: Vec<EdgeFunctions>,
    fairness: Vec<Fairness>,
    horizon: usize,
}

impl Scenario {
    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    pub fn edge_functions(&self, e: usize) -> &EdgeFunctions {
        &self.edge_functions[e]
    }

    pub fn fairness(&self, x: usize) -> &Fairness {
        &self.fairness[x]
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn n_targets(&self) -> usize {
        self.network.targets.len()
    }

    pub fn n_sources(&self) -> usize {
        self.network.sources.len()
    }

    pub fn n_edges(&self) -> usize {
        self.network.edges.len()
    }

    /// Number of decision variables, `|E| * T`.
    pub fn n_vars(&self) -> usize {
        self.n_edges() * self.horizon
    }

    #[inline]
    pub fn var_index(&self, e: usize, t: usize) -> usize {
        e * self.horizon + t
    }

    /// Variable indices owned by target `x` (its edges across all periods).
    pub fn target_vars(&self, x: usize) -> Vec<usize> {
        self.vars_of(&self.network.target_edges[x])
    }

    /// Variable indices owned by source `y`.
    pub fn source_vars(&self, y: usize) -> Vec<usize> {
        self.vars_of(&self.network.source_edges[y])
    }

    fn vars_of(&self, edges: &[usize]) -> Vec<usize> {
        let t_len = self.horizon;
        edges
            .iter()
            .flat_map(|&e| (0..t_len).map(move |t| e * t_len + t))
            .collect()
    }

    pub fn edge_keys(&self) -> Vec<EdgeKey> {
        (0..self.n_edges())
            .map(|e| self.network.edge_key(e))
            .collect()
    }

    /// Returns a copy with every fairness weight replaced.
    pub fn with_uniform_weight(&self, weight: f64) -> Scenario {
        let mut out = self.clone();
        for f in &mut out.fairness {
            f.weight = weight;
        }
        out
    }

    /// Returns a copy with every fairness weight multiplied by `factor`.
    pub fn with_scaled_weights(&self, factor: f64) -> Scenario {
        let mut out = self.clone();
        for f in &mut out.fairness {
            f.weight *= factor;
        }
        out
    }

    /// Inverse of [`build_scenario`], used for serialization and for
    /// applying online mutations at the id level.
    pub fn to_document(&self) -> ScenarioDocument {
        let net = &self.network;
        let edges = net
            .edges
            .iter()
            .zip(&self.edge_functions)
            .map(|(&(x, y), f)| EdgeDocument {
                target: net.targets[x].clone(),
                source: net.sources[y].clone(),
                d: f.d,
                s: f.s,
                c: f.c,
            })
            .collect();
        let targets: BTreeMap<_, _> = net
            .targets
            .iter()
            .zip(&self.bounds.targets)
            .map(|(id, b)| {
                (
                    id.clone(),
                    TargetBounds {
                        p_lo: b.lo,
                        p_hi: b.hi,
                    },
                )
            })
            .collect();
        let sources: BTreeMap<_, _> = net
            .sources
            .iter()
            .zip(&self.bounds.sources)
            .map(|(id, b)| {
                (
                    id.clone(),
                    SourceBounds {
                        q_lo: b.lo,
                        q_hi: b.hi,
                    },
                )
            })
            .collect();
        let fairness = net
            .targets
            .iter()
            .zip(&self.fairness)
            .map(|(id, f)| {
                (
                    id.clone(),
                    FairnessDocument {
                        weight: f.weight,
                        function: f.function,
                    },
                )
            })
            .collect();
        ScenarioDocument {
            targets: net.targets.clone(),
            sources: net.sources.clone(),
            edges,
            bounds: BoundsDocument { targets, sources },
            fairness,
            horizon: self.horizon,
        }
    }
}

fn check_finite_nonneg(v: f64) -> bool {
    v.is_finite() && v >= 0.0
}

fn check_function(subject: &str, role: Role, spec: &FunctionSpec, violations: &mut Vec<Violation>) {
    if !role.allows(spec.kind) {
        violations.push(Violation::new(
            subject,
            format!(
                "disallowed function role: {} is not permitted for role {}",
                spec.kind,
                role.label()
            ),
        ));
    }
    if !check_finite_nonneg(spec.coef) {
        violations.push(Violation::new(
            subject,
            format!(
                "negative coefficient {} for role {}",
                spec.coef,
                role.label()
            ),
        ));
    }
}

/// Validates raw scenario inputs.
///
/// Every violated invariant is reported, each tagged with the node or edge
/// it concerns. An edge whose `d`, `s` and `c` coefficients are all zero is
/// treated as absent and dropped with a warning.
pub fn build_scenario(doc: &ScenarioDocument) -> Result<Scenario> {
    let mut violations = Vec::new();

    let mut target_index = HashMap::new();
    for (i, id) in doc.targets.iter().enumerate() {
        if target_index.insert(id.as_str(), i).is_some() {
            violations.push(Violation::new(
                format!("target {id}"),
                "duplicate target id",
            ));
        }
    }
    let mut source_index = HashMap::new();
    for (i, id) in doc.sources.iter().enumerate() {
        if source_index.insert(id.as_str(), i).is_some() {
            violations.push(Violation::new(
                format!("source {id}"),
                "duplicate source id",
            ));
        }
    }

    if doc.horizon == 0 {
        violations.push(Violation::new("horizon", "horizon must be at least 1"));
    }

    let mut edges = Vec::with_capacity(doc.edges.len());
    let mut edge_functions = Vec::with_capacity(doc.edges.len());
    let mut seen = BTreeSet::new();
    for ed in &doc.edges {
        let subject = format!("edge ({}, {})", ed.target, ed.source);
        let x = target_index.get(ed.target.as_str()).copied();
        let y = source_index.get(ed.source.as_str()).copied();
        if x.is_none() {
            violations.push(Violation::new(&subject, "unknown target"));
        }
        if y.is_none() {
            violations.push(Violation::new(&subject, "unknown source"));
        }
        if !seen.insert((ed.target.as_str(), ed.source.as_str())) {
            violations.push(Violation::new(&subject, "duplicate edge"));
            continue;
        }
        check_function(&subject, Role::TargetUtility, &ed.d, &mut violations);
        check_function(&subject, Role::SourceUtility, &ed.s, &mut violations);
        check_function(&subject, Role::Cost, &ed.c, &mut violations);
        let funcs = EdgeFunctions {
            d: ed.d,
            s: ed.s,
            c: ed.c,
        };
        if funcs.is_zero() {
            warn!("{subject} has all-zero coefficients; treating it as absent");
            continue;
        }
        if let (Some(x), Some(y)) = (x, y) {
            edges.push((x, y));
            edge_functions.push(funcs);
        }
    }

    let mut target_edges = vec![Vec::new(); doc.targets.len()];
    let mut source_edges = vec![Vec::new(); doc.sources.len()];
    for (e, &(x, y)) in edges.iter().enumerate() {
        target_edges[x].push(e);
        source_edges[y].push(e);
    }
    for (x, id) in doc.targets.iter().enumerate() {
        if target_edges[x].is_empty() {
            violations.push(Violation::new(
                format!("target {id}"),
                "isolated node: no incident edge",
            ));
        }
    }
    for (y, id) in doc.sources.iter().enumerate() {
        if source_edges[y].is_empty() {
            violations.push(Violation::new(
                format!("source {id}"),
                "isolated node: no incident edge",
            ));
        }
    }

    let mut target_bounds = Vec::with_capacity(doc.targets.len());
    for id in &doc.targets {
        let subject = format!("target {id}");
        match doc.bounds.targets.get(id) {
            Some(b) => {
                check_bounds(&subject, b.p_lo, b.p_hi, &mut violations);
                target_bounds.push(NodeBounds::new(b.p_lo, b.p_hi));
            }
            None => {
                violations.push(Violation::new(subject, "missing bounds"));
                target_bounds.push(NodeBounds::new(0.0, 0.0));
            }
        }
    }
    for id in doc.bounds.targets.keys() {
        if !target_index.contains_key(id.as_str()) {
            violations.push(Violation::new(
                format!("target {id}"),
                "bounds for unknown target",
            ));
        }
    }
    let mut source_bounds = Vec::with_capacity(doc.sources.len());
    for id in &doc.sources {
        let subject = format!("source {id}");
        match doc.bounds.sources.get(id) {
            Some(b) => {
                check_bounds(&subject, b.q_lo, b.q_hi, &mut violations);
                source_bounds.push(NodeBounds::new(b.q_lo, b.q_hi));
            }
            None => {
                violations.push(Violation::new(subject, "missing bounds"));
                source_bounds.push(NodeBounds::new(0.0, 0.0));
            }
        }
    }
    for id in doc.bounds.sources.keys() {
        if !source_index.contains_key(id.as_str()) {
            violations.push(Violation::new(
                format!("source {id}"),
                "bounds for unknown source",
            ));
        }
    }

    // Targets without a fairness entry get weight 0.
    let mut fairness = Vec::with_capacity(doc.targets.len());
    for id in &doc.targets {
        let subject = format!("target {id}");
        match doc.fairness.get(id) {
            Some(f) => {
                if !check_finite_nonneg(f.weight) {
                    violations.push(Violation::new(
                        &subject,
                        format!("negative fairness weight {}", f.weight),
                    ));
                }
                check_function(&subject, Role::Fairness, &f.function, &mut violations);
                fairness.push(Fairness {
                    weight: f.weight,
                    function: f.function,
                });
            }
            None => fairness.push(Fairness::with_weight(0.0)),
        }
    }
    for id in doc.fairness.keys() {
        if !target_index.contains_key(id.as_str()) {
            violations.push(Violation::new(
                format!("target {id}"),
                "fairness entry for unknown target",
            ));
        }
    }

    if !violations.is_empty() {
        return Err(Error::Validation(violations));
    }

    Ok(Scenario {
        network: Network {
            targets: doc.targets.clone(),
            sources: doc.sources.clone(),
            edges,
            target_edges,
            source_edges,
        },
        bounds: Bounds {
            targets: target_bounds,
            sources: source_bounds,
        },
        edge_functions,
        fairness,
        horizon: doc.horizon,
    })
}

fn check_bounds(subject: &str, lo: f64, hi: f64, violations: &mut Vec<Violation>) {
    if !check_finite_nonneg(lo) || !check_finite_nonneg(hi) {
        violations.push(Violation::new(
            subject,
            format!("bounds must be finite and nonnegative, got [{lo}, {hi}]"),
        ));
    } else if lo > hi {
        violations.push(Violation::new(
            subject,
            format!("lower bound {lo} exceeds upper bound {hi} (lo > hi)"),
        ));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::document::ScenarioBuilder;

    fn messages(err: Error) -> Vec<String> {
        match err {
            Error::Validation(v) => v.iter().map(ToString::to_string).collect(),
            other => panic!("expected validation error, got {other}"),
        }
    }

    #[test]
    fn case_study_network_is_valid() {
        let zeta = [[1.0, 2.0, 1.0, 2.0, 1.0], [2.0, 1.0, 3.0, 1.0, 2.0]];
        let mut b = ScenarioBuilder::new(1);
        for (i, hi) in [4.0, 4.0].into_iter().enumerate() {
            b = b.target(&format!("x{}", i + 1), 0.0, hi, 3.0);
        }
        for (j, hi) in [2.0, 3.0, 4.0, 3.0, 2.0].into_iter().enumerate() {
            b = b.source(&format!("y{}", j + 1), 0.0, hi);
        }
        for (i, row) in zeta.iter().enumerate() {
            for (j, z) in row.iter().enumerate() {
                b = b.edge(
                    &format!("x{}", i + 1),
                    &format!("y{}", j + 1),
                    FunctionSpec::linear(1.0),
                    FunctionSpec::linear(1.0),
                    FunctionSpec::linear(*z),
                );
            }
        }
        let sc = b.build().unwrap();
        assert_eq!(sc.n_targets(), 2);
        assert_eq!(sc.n_sources(), 5);
        assert_eq!(sc.n_edges(), 10);
        assert_eq!(
            sc.network().suppliers_of(1).collect::<Vec<_>>(),
            vec![0, 1, 2, 3, 4]
        );
        assert_eq!(sc.network().customers_of(2).collect::<Vec<_>>(), vec![0, 1]);
    }

    #[test]
    fn isolated_source_rejected() {
        let err = ScenarioBuilder::new(1)
            .target("x", 0.0, 1.0, 0.0)
            .source("y1", 0.0, 1.0)
            .source("y2", 0.0, 1.0)
            .linear_edge("x", "y1", 1.0, 1.0, 1.0)
            .build()
            .unwrap_err();
        let msgs = messages(err);
        assert_eq!(msgs.len(), 1);
        assert!(msgs[0].contains("source y2") && msgs[0].contains("isolated node"));
    }

    #[test]
    fn quadratic_target_utility_rejected() {
        let err = ScenarioBuilder::new(1)
            .target("x", 0.0, 1.0, 0.0)
            .source("y", 0.0, 1.0)
            .edge(
                "x",
                "y",
                FunctionSpec::quadratic(1.0),
                FunctionSpec::linear(1.0),
                FunctionSpec::linear(1.0),
            )
            .build()
            .unwrap_err();
        let msgs = messages(err);
        assert!(msgs.iter().any(|m| m.contains("disallowed function role")));
    }

    #[test]
    fn every_violation_listed() {
        let err = ScenarioBuilder::new(0)
            .target("x", 3.0, 1.0, -1.0)
            .source("y", 0.0, 1.0)
            .linear_edge("x", "y", -1.0, 1.0, 1.0)
            .linear_edge("x", "z", 1.0, 1.0, 1.0)
            .build()
            .unwrap_err();
        let msgs = messages(err);
        assert!(msgs.iter().any(|m| m.contains("horizon")));
        assert!(msgs.iter().any(|m| m.contains("lo > hi")));
        assert!(msgs.iter().any(|m| m.contains("negative fairness weight")));
        assert!(msgs.iter().any(|m| m.contains("negative coefficient")));
        assert!(msgs.iter().any(|m| m.contains("unknown source")));
    }

    #[test]
    fn zero_triple_dropped() {
        let sc = ScenarioBuilder::new(1)
            .target("x1", 0.0, 1.0, 0.0)
            .target("x2", 0.0, 1.0, 0.0)
            .source("y", 0.0, 1.0)
            .linear_edge("x1", "y", 1.0, 1.0, 1.0)
            .linear_edge("x2", "y", 1.0, 0.0, 0.0)
            .linear_edge("x2", "y", 0.0, 0.0, 0.0)
            .build();
        // the duplicate is flagged before normalization
        assert!(sc.is_err());

        let err = ScenarioBuilder::new(1)
            .target("x1", 0.0, 1.0, 0.0)
            .target("x2", 0.0, 1.0, 0.0)
            .source("y", 0.0, 1.0)
            .linear_edge("x1", "y", 1.0, 1.0, 1.0)
            .linear_edge("x2", "y", 0.0, 0.0, 0.0)
            .build()
            .unwrap_err();
        assert!(messages(err)
            .iter()
            .any(|m| m.contains("target x2: isolated")));
    }

    #[test]
    fn document_round_trip() {
        let sc = ScenarioBuilder::new(2)
            .target("x", 0.5, 3.0, 2.0)
            .source("y", 0.0, 4.0)
            .edge(
                "x",
                "y",
                FunctionSpec::log(2.0),
                FunctionSpec::linear(1.0),
                FunctionSpec::quadratic(0.5),
            )
            .build()
            .unwrap();
        let again = build_scenario(&sc.to_document()).unwrap();
        assert_eq!(sc, again);
    }

    #[test]
    fn variable_layout() {
        let sc = ScenarioBuilder::new(3)
            .target("x1", 0.0, 1.0, 0.0)
            .target("x2", 0.0, 1.0, 0.0)
            .source("y1", 0.0, 1.0)
            .source("y2", 0.0, 1.0)
            .linear_edge("x1", "y1", 1.0, 1.0, 1.0)
            .linear_edge("x1", "y2", 1.0, 1.0, 1.0)
            .linear_edge("x2", "y1", 1.0, 1.0, 1.0)
            .linear_edge("x2", "y2", 1.0, 1.0, 1.0)
            .build()
            .unwrap();
        assert_eq!(sc.n_vars(), 12);
        assert_eq!(sc.target_vars(1), vec![6, 7, 8, 9, 10, 11]);
        assert_eq!(sc.source_vars(1), vec![3, 4, 5, 9, 10, 11]);
    }
}
