//! Timed network and parameter changes applied to a running solver.
//!
//! Events land between full iterations: an event with `at_iteration = k`
//! is applied once iteration `k` has finished and before iteration `k + 1`
//! starts. Variables on surviving `(edge, period)` keys carry over exactly,
//! variables on new keys start at zero, and the iteration counter keeps
//! running.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::admm::{advance, init_state, SolverOptions, SolverState};
use crate::error::{Error, Result, Violation};
use crate::metrics::Trajectory;
use crate::model::{
    build_scenario, check_feasibility, EdgeDocument, EdgeKey, FairnessDocument, FunctionSpec,
    Scenario, ScenarioDocument, SourceBounds, TargetBounds, TransportPlan,
};

fn default_fairness_function() -> FunctionSpec {
    crate::model::Fairness::DEFAULT_FUNCTION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewTarget {
    pub id: String,
    pub p_lo: f64,
    pub p_hi: f64,
    #[serde(default)]
    pub weight: f64,
    #[serde(default = "default_fairness_function")]
    pub function: FunctionSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewSource {
    pub id: String,
    pub q_lo: f64,
    pub q_hi: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeRef {
    pub target: String,
    pub source: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetBoundsUpdate {
    pub p_lo: Option<f64>,
    pub p_hi: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceBoundsUpdate {
    pub q_lo: Option<f64>,
    pub q_hi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsUpdate {
    #[serde(default)]
    pub targets: BTreeMap<String, TargetBoundsUpdate>,
    #[serde(default)]
    pub sources: BTreeMap<String, SourceBoundsUpdate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionUpdate {
    pub target: String,
    pub source: String,
    pub d: Option<FunctionSpec>,
    pub s: Option<FunctionSpec>,
    pub c: Option<FunctionSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FairnessUpdate {
    pub weight: Option<f64>,
    pub function: Option<FunctionSpec>,
}

/// One batch of changes. Mutations apply in field order: removals, then
/// additions, then partial updates.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChangeEvent {
    pub at_iteration: u64,
    #[serde(default)]
    pub remove_edges: Vec<EdgeRef>,
    #[serde(default)]
    pub remove_targets: Vec<String>,
    #[serde(default)]
    pub remove_sources: Vec<String>,
    #[serde(default)]
    pub add_targets: Vec<NewTarget>,
    #[serde(default)]
    pub add_sources: Vec<NewSource>,
    #[serde(default)]
    pub add_edges: Vec<EdgeDocument>,
    #[serde(default)]
    pub update_bounds: BoundsUpdate,
    #[serde(default)]
    pub update_functions: Vec<FunctionUpdate>,
    #[serde(default)]
    pub update_fairness: BTreeMap<String, FairnessUpdate>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EventSchedule {
    events: Vec<ChangeEvent>,
}

impl EventSchedule {
    pub fn new(events: Vec<ChangeEvent>) -> Result<Self> {
        for (i, w) in events.windows(2).enumerate() {
            if w[1].at_iteration <= w[0].at_iteration {
                return Err(Error::Schedule(format!(
                    "event {} at iteration {} does not come after event {} at iteration {}",
                    i + 1,
                    w[1].at_iteration,
                    i,
                    w[0].at_iteration
                )));
            }
        }
        Ok(Self { events })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_json(text: &str) -> serde_json::Result<Vec<ChangeEvent>> {
        serde_json::from_str(text)
    }

    /// Reads a JSON list of events.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let events = Self::from_json(&text).map_err(|source| Error::Parse {
            path: path.to_path_buf(),
            source,
        })?;
        Self::new(events)
    }

    pub fn events(&self) -> &[ChangeEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

fn mutate(doc: &mut ScenarioDocument, ev: &ChangeEvent) -> Vec<Violation> {
    let mut out = Vec::new();
    let has_target = |doc: &ScenarioDocument, id: &str| doc.targets.iter().any(|t| t == id);
    let has_source = |doc: &ScenarioDocument, id: &str| doc.sources.iter().any(|s| s == id);
    let edge_pos = |doc: &ScenarioDocument, t: &str, s: &str| {
        doc.edges
            .iter()
            .position(|e| e.target == t && e.source == s)
    };

    for r in &ev.remove_edges {
        match edge_pos(doc, &r.target, &r.source) {
            Some(i) => {
                doc.edges.remove(i);
            }
            None => out.push(Violation::new(
                format!("edge ({}, {})", r.target, r.source),
                "cannot remove: no such edge",
            )),
        }
    }
    for id in &ev.remove_targets {
        if !has_target(doc, id) {
            out.push(Violation::new(
                format!("target {id}"),
                "cannot remove: no such target",
            ));
            continue;
        }
        doc.targets.retain(|t| t != id);
        doc.edges.retain(|e| &e.target != id);
        doc.bounds.targets.remove(id);
        doc.fairness.remove(id);
    }
    for id in &ev.remove_sources {
        if !has_source(doc, id) {
            out.push(Violation::new(
                format!("source {id}"),
                "cannot remove: no such source",
            ));
            continue;
        }
        doc.sources.retain(|s| s != id);
        doc.edges.retain(|e| &e.source != id);
        doc.bounds.sources.remove(id);
    }

    for t in &ev.add_targets {
        if has_target(doc, &t.id) {
            out.push(Violation::new(
                format!("target {}", t.id),
                "cannot add: already present",
            ));
            continue;
        }
        doc.targets.push(t.id.clone());
        doc.bounds.targets.insert(
            t.id.clone(),
            TargetBounds {
                p_lo: t.p_lo,
                p_hi: t.p_hi,
            },
        );
        doc.fairness.insert(
            t.id.clone(),
            FairnessDocument {
                weight: t.weight,
                function: t.function,
            },
        );
    }
    for s in &ev.add_sources {
        if has_source(doc, &s.id) {
            out.push(Violation::new(
                format!("source {}", s.id),
                "cannot add: already present",
            ));
            continue;
        }
        doc.sources.push(s.id.clone());
        doc.bounds.sources.insert(
            s.id.clone(),
            SourceBounds {
                q_lo: s.q_lo,
                q_hi: s.q_hi,
            },
        );
    }
    for e in &ev.add_edges {
        if edge_pos(doc, &e.target, &e.source).is_some() {
            out.push(Violation::new(
                format!("edge ({}, {})", e.target, e.source),
                "cannot add: already present",
            ));
            continue;
        }
        doc.edges.push(e.clone());
    }

    for (id, u) in &ev.update_bounds.targets {
        match doc.bounds.targets.get_mut(id) {
            Some(b) => {
                b.p_lo = u.p_lo.unwrap_or(b.p_lo);
                b.p_hi = u.p_hi.unwrap_or(b.p_hi);
            }
            None => out.push(Violation::new(
                format!("target {id}"),
                "cannot update bounds: no such target",
            )),
        }
    }
    for (id, u) in &ev.update_bounds.sources {
        match doc.bounds.sources.get_mut(id) {
            Some(b) => {
                b.q_lo = u.q_lo.unwrap_or(b.q_lo);
                b.q_hi = u.q_hi.unwrap_or(b.q_hi);
            }
            None => out.push(Violation::new(
                format!("source {id}"),
                "cannot update bounds: no such source",
            )),
        }
    }
    for u in &ev.update_functions {
        match edge_pos(doc, &u.target, &u.source) {
            Some(i) => {
                let e = &mut doc.edges[i];
                e.d = u.d.unwrap_or(e.d);
                e.s = u.s.unwrap_or(e.s);
                e.c = u.c.unwrap_or(e.c);
            }
            None => out.push(Violation::new(
                format!("edge ({}, {})", u.target, u.source),
                "cannot update functions: no such edge",
            )),
        }
    }
    for (id, u) in &ev.update_fairness {
        if !has_target(doc, id) {
            out.push(Violation::new(
                format!("target {id}"),
                "cannot update fairness: no such target",
            ));
            continue;
        }
        let entry = doc.fairness.entry(id.clone()).or_insert(FairnessDocument {
            weight: 0.0,
            function: default_fairness_function(),
        });
        entry.weight = u.weight.unwrap_or(entry.weight);
        entry.function = u.function.unwrap_or(entry.function);
    }
    out
}

/// The scenario after `event`. Fails with the list of problems if the
/// event does not fit the scenario, the result is invalid, or the result
/// fails the supply check.
pub fn apply_to_scenario(scenario: &Scenario, event: &ChangeEvent) -> Result<Scenario> {
    let mut doc = scenario.to_document();
    let violations = mutate(&mut doc, event);
    if !violations.is_empty() {
        return Err(Error::Validation(violations));
    }
    let next = build_scenario(&doc)?;
    let report = check_feasibility(&next);
    if !report.feasible() {
        return Err(Error::Infeasible(Box::new(report)));
    }
    Ok(next)
}

/// Carries solver variables over to a changed scenario: surviving keys
/// are copied, new keys start at zero.
pub fn remap_state(state: &SolverState, from: &Scenario, to: &Scenario) -> SolverState {
    let old: HashMap<EdgeKey, usize> = from
        .edge_keys()
        .into_iter()
        .enumerate()
        .map(|(e, k)| (k, e))
        .collect();
    let mut next = SolverState::zeros(to.n_vars());
    next.k = state.k;
    let horizon = to.horizon();
    for (e, key) in to.edge_keys().into_iter().enumerate() {
        let Some(&old_e) = old.get(&key) else {
            continue;
        };
        for t in 0..horizon.min(from.horizon()) {
            let (i, j) = (to.var_index(e, t), from.var_index(old_e, t));
            next.pi[i] = state.pi[j];
            next.pi_d[i] = state.pi_d[j];
            next.pi_s[i] = state.pi_s[j];
            next.alpha[i] = state.alpha[j];
        }
    }
    next
}

pub fn apply_event(
    state: &SolverState,
    scenario: &Scenario,
    event: &ChangeEvent,
) -> Result<(SolverState, Scenario)> {
    let next = apply_to_scenario(scenario, event)?;
    Ok((remap_state(state, scenario, &next), next))
}

/// The scenario in force during each segment: the initial one followed by
/// the result of each event in turn.
pub fn segment_scenarios(initial: &Scenario, schedule: &EventSchedule) -> Result<Vec<Scenario>> {
    let mut out = vec![initial.clone()];
    for (index, ev) in schedule.events().iter().enumerate() {
        let next = apply_to_scenario(out.last().expect("nonempty"), ev)
            .map_err(|e| event_error(index, ev, e))?;
        out.push(next);
    }
    Ok(out)
}

fn event_error(index: usize, ev: &ChangeEvent, err: Error) -> Error {
    Error::Event {
        index,
        at: ev.at_iteration,
        reason: err.to_string(),
    }
}

#[derive(Debug, Clone)]
pub struct SegmentReport {
    /// Value of `k` when the segment started.
    pub start: u64,
    /// Value of `k` when the segment ended.
    pub end: u64,
    /// Whether the last iteration of the segment met the tolerance.
    pub converged: bool,
    pub capped_subproblems: usize,
    /// Consensus plan at the end of the segment.
    pub plan: TransportPlan,
    pub scenario: Scenario,
}

#[derive(Debug, Clone)]
pub struct OnlineResult {
    pub segments: Vec<SegmentReport>,
    /// All records, with event markers.
    pub trajectory: Trajectory,
    pub plan: TransportPlan,
    pub state: SolverState,
    /// Whether the final segment converged.
    pub converged: bool,
}

/// Runs the solver, applying each event at its iteration.
///
/// Segments before the last event run until the next event regardless of
/// convergence; the last segment runs until convergence or `max_iters`.
/// `references`, when given, holds one plan per segment and enables the
/// residual-to-reference column for that segment.
pub fn run_online(
    initial: &Scenario,
    schedule: &EventSchedule,
    options: &SolverOptions,
    references: Option<&[TransportPlan]>,
) -> Result<OnlineResult> {
    options.validate()?;
    if options.reference_plan.is_some() {
        return Err(Error::InvalidOption(
            "online runs take one reference plan per segment, not a single reference".into(),
        ));
    }
    let events = schedule.events();
    if let Some(last) = events.last() {
        if last.at_iteration >= options.max_iters {
            return Err(Error::Schedule(format!(
                "event at iteration {} is not before max_iters {}",
                last.at_iteration, options.max_iters
            )));
        }
    }
    if let Some(refs) = references {
        if refs.len() != events.len() + 1 {
            return Err(Error::InvalidOption(format!(
                "expected {} reference plans, one per segment, got {}",
                events.len() + 1,
                refs.len()
            )));
        }
    }

    let mut scenario = initial.clone();
    let mut state = init_state(initial)?;
    let mut trajectory = Trajectory::new();
    let mut segments = Vec::with_capacity(events.len() + 1);
    let mut converged = false;
    for seg in 0..=events.len() {
        let last = seg == events.len();
        let stop_at = if last {
            options.max_iters
        } else {
            events[seg].at_iteration
        };
        let reference = references.map(|r| r[seg].clone());
        if let Some(r) = &reference {
            r.check_aligned(&scenario)?;
        }
        let seg_options = SolverOptions {
            reference_plan: reference,
            ..options.clone()
        };
        let start = state.k;
        let (seg_converged, capped) = advance(
            &mut state,
            &scenario,
            &seg_options,
            stop_at,
            last,
            &mut trajectory,
        );
        if seg_converged {
            log::info!("segment {seg} converged by iteration {}", state.k);
        } else if state.k > start {
            log::warn!("segment {seg} did not converge by iteration {}", state.k);
        }
        segments.push(SegmentReport {
            start,
            end: state.k,
            converged: seg_converged,
            capped_subproblems: capped,
            plan: TransportPlan::from_amounts(&scenario, state.pi.clone())?,
            scenario: scenario.clone(),
        });
        converged = seg_converged;
        if !last {
            let ev = &events[seg];
            let (next_state, next_scenario) =
                apply_event(&state, &scenario, ev).map_err(|e| event_error(seg, ev, e))?;
            state = next_state;
            scenario = next_scenario;
            trajectory.markers.push(ev.at_iteration);
        }
    }
    Ok(OnlineResult {
        plan: TransportPlan::from_amounts(&scenario, state.pi.clone())?,
        segments,
        trajectory,
        state,
        converged,
    })
}
