//! Distributed consensus iteration.
//!
//! Every target proposes amounts on its own edges (`pi_d`) and every source
//! proposes amounts on its own edges (`pi_s`); both sides read the same
//! consensus plan `pi(k)` and per-edge price `alpha(k)`, so the two phases
//! are independent sweeps over nodes. The new consensus is the average of
//! the proposals, and the price moves by `eta / 2` times their disagreement.
//!
//! A target pays `alpha` per unit it requests and a source earns `alpha` per
//! unit it ships, so a positive disagreement `pi_d > pi_s` raises the price
//! until both sides agree.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::metrics::{raw_distance, IterationRecord, Trajectory};
use crate::model::{check_feasibility, objective, Scenario, TransportPlan};
use crate::projection::{source_problem, target_problem, InnerOptions};

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Penalty constant of the augmented Lagrangian.
    pub eta: f64,
    /// Tolerance on both the primal residual and the per-iteration change
    /// of the consensus plan.
    pub tol: f64,
    pub max_iters: u64,
    pub record_every: u64,
    /// When set, every record carries the distance to this plan.
    pub reference_plan: Option<TransportPlan>,
    pub inner: InnerOptions,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            eta: 1.0,
            tol: 1e-6,
            max_iters: 10_000,
            record_every: 1,
            reference_plan: None,
            inner: InnerOptions::default(),
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidOption(format!(
                "eta must be positive, got {}",
                self.eta
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidOption(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if self.max_iters == 0 || self.record_every == 0 {
            return Err(Error::InvalidOption(
                "max_iters and record_every must be at least 1".into(),
            ));
        }
        if !(self.inner.tol > 0.0) || self.inner.max_iters == 0 {
            return Err(Error::InvalidOption(
                "inner tolerance and cap must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// ADMM variables in the scenario's `(edge, period)` layout.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub pi: Vec<f64>,
    pub pi_d: Vec<f64>,
    pub pi_s: Vec<f64>,
    pub alpha: Vec<f64>,
    pub k: u64,
}

impl SolverState {
    pub fn zeros(n_vars: usize) -> Self {
        Self {
            pi: vec![0.0; n_vars],
            pi_d: vec![0.0; n_vars],
            pi_s: vec![0.0; n_vars],
            alpha: vec![0.0; n_vars],
            k: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pi.is_empty()
    }
}

/// Cold start: every variable zero, `k = 0`. Rejects scenarios that fail
/// the supply/demand feasibility conditions.
pub fn init_state(scenario: &Scenario) -> Result<SolverState> {
    let report = check_feasibility(scenario);
    if !report.feasible() {
        return Err(Error::Infeasible(Box::new(report)));
    }
    Ok(SolverState::zeros(scenario.n_vars()))
}

pub fn consensus_update(pi_d: &[f64], pi_s: &[f64]) -> Vec<f64> {
    pi_d.iter().zip(pi_s).map(|(d, s)| 0.5 * (d + s)).collect()
}

pub fn dual_update(alpha: &[f64], pi_d: &[f64], pi_s: &[f64], eta: f64) -> Vec<f64> {
    let half = 0.5 * eta;
    alpha
        .iter()
        .zip(pi_d.iter().zip(pi_s))
        .map(|(a, (d, s))| a + half * (d - s))
        .collect()
}

pub fn primal_residual(state: &SolverState) -> f64 {
    state
        .pi_d
        .iter()
        .zip(&state.pi_s)
        .map(|(d, s)| (d - s).abs())
        .fold(0.0, f64::max)
}

/// Diagnostics of one full sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepReport {
    /// `max |pi(k+1) - pi(k)|`.
    pub max_change: f64,
    pub primal_residual: f64,
    /// Node subproblems that hit the inner iteration cap.
    pub capped_subproblems: usize,
    pub worst_pg_norm: f64,
}

/// One full sweep: target phase, source phase, consensus, price update.
///
/// Node subproblems within a phase run in parallel; results are scattered
/// back in node order so the outcome does not depend on scheduling.
pub fn iterate(
    state: &mut SolverState,
    scenario: &Scenario,
    options: &SolverOptions,
) -> SweepReport {
    let eta = options.eta;
    let inner = options.inner;

    let targets: Vec<_> = (0..scenario.n_targets())
        .into_par_iter()
        .map(|x| {
            let sol = target_problem(scenario, x, &state.pi, &state.alpha, eta).solve(&inner);
            (scenario.target_vars(x), sol)
        })
        .collect();
    let sources: Vec<_> = (0..scenario.n_sources())
        .into_par_iter()
        .map(|y| {
            let sol = source_problem(scenario, y, &state.pi, &state.alpha, eta).solve(&inner);
            (scenario.source_vars(y), sol)
        })
        .collect();

    let mut capped = 0;
    let mut worst_pg: f64 = 0.0;
    for (vars, sol) in &targets {
        capped += usize::from(!sol.converged);
        worst_pg = worst_pg.max(sol.pg_norm);
        for (&i, &v) in vars.iter().zip(&sol.point) {
            state.pi_d[i] = v;
        }
    }
    for (vars, sol) in &sources {
        capped += usize::from(!sol.converged);
        worst_pg = worst_pg.max(sol.pg_norm);
        for (&i, &v) in vars.iter().zip(&sol.point) {
            state.pi_s[i] = v;
        }
    }

    let pi_next = consensus_update(&state.pi_d, &state.pi_s);
    let max_change = pi_next
        .iter()
        .zip(&state.pi)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    state.pi = pi_next;
    state.alpha = dual_update(&state.alpha, &state.pi_d, &state.pi_s, eta);
    state.k += 1;

    SweepReport {
        max_change,
        primal_residual: primal_residual(state),
        capped_subproblems: capped,
        worst_pg_norm: worst_pg,
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    /// Final consensus plan.
    pub plan: TransportPlan,
    pub trajectory: Trajectory,
    pub converged: bool,
    /// Value of `k` when the run stopped.
    pub iterations: u64,
    pub state: SolverState,
    /// Total node subproblems that hit the inner cap over the run.
    pub capped_subproblems: usize,
}

pub(crate) fn record(
    state: &SolverState,
    scenario: &Scenario,
    reference: Option<&TransportPlan>,
    residual: f64,
) -> IterationRecord {
    IterationRecord {
        k: state.k,
        social_utility: objective(scenario, &state.pi),
        primal_residual: residual,
        reference_residual: reference.map(|r| raw_distance(&state.pi, r.amounts())),
    }
}

/// Iterates from `state` until both the primal residual and the consensus
/// change fall below `tol`, or until `k` reaches `stop_at`.
pub(crate) fn advance(
    state: &mut SolverState,
    scenario: &Scenario,
    options: &SolverOptions,
    stop_at: u64,
    stop_on_convergence: bool,
    trajectory: &mut Trajectory,
) -> (bool, usize) {
    let reference = options.reference_plan.as_ref();
    let mut converged = false;
    let mut capped = 0;
    while state.k < stop_at {
        let sweep = iterate(state, scenario, options);
        capped += sweep.capped_subproblems;
        converged = sweep.primal_residual < options.tol && sweep.max_change < options.tol;
        let last = state.k == stop_at || (converged && stop_on_convergence);
        if state.k.is_multiple_of(options.record_every) || last {
            trajectory.push(record(state, scenario, reference, sweep.primal_residual));
        }
        if converged && stop_on_convergence {
            break;
        }
    }
    (converged, capped)
}

/// Runs the distributed algorithm from a cold start. Non-convergence within
/// `max_iters` is reported through `converged`, not as an error.
pub fn run(scenario: &Scenario, options: &SolverOptions) -> Result<RunResult> {
    options.validate()?;
    if let Some(r) = &options.reference_plan {
        r.check_aligned(scenario)?;
    }
    let mut state = init_state(scenario)?;
    let mut trajectory = Trajectory::new();
    let (converged, capped) = advance(
        &mut state,
        scenario,
        options,
        options.max_iters,
        true,
        &mut trajectory,
    );
    Ok(RunResult {
        plan: TransportPlan::from_amounts(scenario, state.pi.clone())?,
        trajectory,
        converged,
        iterations: state.k,
        state,
        capped_subproblems: capped,
    })
}
