//! Projected gradient ascent on the full concave problem.
//!
//! The feasible set is the intersection of two product sets over the same
//! variables: one capped simplex per target and one per source. Each family
//! alone projects exactly (node blocks are disjoint), and the intersection
//! is projected with Dykstra's alternating scheme.

use crate::error::{Error, Result};
use crate::model::{check_feasibility, objective, objective_gradient, Scenario, TransportPlan};
use crate::projection::{project_into, CappedSimplex};

use super::{OracleOptions, StepRule};

const DYKSTRA_TOL: f64 = 1e-14;
const DYKSTRA_ACCEPT: f64 = 1e-10;
const DYKSTRA_MAX_ITERS: usize = 100_000;
const MAX_STEP: f64 = 1e2;

#[derive(Debug, Clone)]
pub struct CentralizedSolution {
    pub plan: TransportPlan,
    pub objective: f64,
    pub iterations: usize,
    /// `|| x - P(x + grad) ||` at the returned plan.
    pub pg_norm: f64,
    pub converged: bool,
}

struct Family {
    blocks: Vec<(Vec<usize>, CappedSimplex)>,
}

impl Family {
    fn new(blocks: impl Iterator<Item = (Vec<usize>, f64, f64)>) -> Self {
        let blocks = blocks
            .map(|(vars, lo, hi)| {
                let set = CappedSimplex::new(vars.len(), lo, hi).expect("validated node bounds");
                (vars, set)
            })
            .collect();
        Self { blocks }
    }

    fn project(&self, v: &[f64], out: &mut [f64]) {
        let mut local = Vec::new();
        let mut projected = Vec::new();
        for (vars, set) in &self.blocks {
            local.clear();
            local.extend(vars.iter().map(|&i| v[i]));
            projected.resize(vars.len(), 0.0);
            project_into(&local, set, &mut projected);
            for (&i, &p) in vars.iter().zip(&projected) {
                out[i] = p;
            }
        }
    }

    fn violation(&self, v: &[f64]) -> f64 {
        let mut local = Vec::new();
        self.blocks.iter().fold(0.0, |m: f64, (vars, set)| {
            local.clear();
            local.extend(vars.iter().map(|&i| v[i]));
            m.max(set.violation(&local))
        })
    }
}

struct FeasibleSet {
    targets: Family,
    sources: Family,
}

impl FeasibleSet {
    fn new(scenario: &Scenario) -> Self {
        let b = scenario.bounds();
        Self {
            targets: Family::new(
                (0..scenario.n_targets())
                    .map(|x| (scenario.target_vars(x), b.targets[x].lo, b.targets[x].hi)),
            ),
            sources: Family::new(
                (0..scenario.n_sources())
                    .map(|y| (scenario.source_vars(y), b.sources[y].lo, b.sources[y].hi)),
            ),
        }
    }

    fn project(&self, v: &[f64]) -> Result<Vec<f64>> {
        let n = v.len();
        let mut x = v.to_vec();
        let mut y = vec![0.0; n];
        let mut p = vec![0.0; n];
        let mut q = vec![0.0; n];
        let mut buf = vec![0.0; n];
        let mut next = vec![0.0; n];
        let mut violation = f64::INFINITY;
        for _ in 0..DYKSTRA_MAX_ITERS {
            for i in 0..n {
                buf[i] = x[i] + p[i];
            }
            self.targets.project(&buf, &mut y);
            let mut change: f64 = 0.0;
            for i in 0..n {
                let p_next = buf[i] - y[i];
                change = change.max((p_next - p[i]).abs());
                p[i] = p_next;
                buf[i] = y[i] + q[i];
            }
            self.sources.project(&buf, &mut next);
            // The iterate alone can stall for several sweeps while the
            // corrections are still moving, so both must settle.
            for i in 0..n {
                let q_next = buf[i] - next[i];
                change = change
                    .max((q_next - q[i]).abs())
                    .max((next[i] - x[i]).abs());
                q[i] = q_next;
            }
            std::mem::swap(&mut x, &mut next);
            violation = self.targets.violation(&x);
            if violation <= DYKSTRA_TOL && change <= DYKSTRA_TOL {
                return Ok(x);
            }
        }
        if violation <= DYKSTRA_ACCEPT {
            Ok(x)
        } else {
            Err(Error::EmptyFeasibleSet(format!(
                "alternating projections stalled at constraint violation {violation:.3e}"
            )))
        }
    }
}

/// Euclidean projection of raw amounts onto the scenario's feasible set.
pub fn project_feasible(scenario: &Scenario, v: &[f64]) -> Result<Vec<f64>> {
    FeasibleSet::new(scenario).project(v)
}

fn lipschitz_bound(scenario: &Scenario) -> f64 {
    let edge = (0..scenario.n_edges())
        .map(|e| {
            let f = scenario.edge_functions(e);
            f.d.curvature_bound() + f.s.curvature_bound() + f.c.curvature_bound()
        })
        .fold(0.0, f64::max);
    let fair = (0..scenario.n_targets())
        .map(|x| {
            let fx = scenario.fairness(x);
            fx.weight * fx.function.curvature_bound() * scenario.target_vars(x).len() as f64
        })
        .fold(0.0, f64::max);
    edge + fair
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Maximizes the social utility over the joint feasible set.
pub fn solve_centralized_report(
    scenario: &Scenario,
    options: &OracleOptions,
) -> Result<CentralizedSolution> {
    options.validate()?;
    let report = check_feasibility(scenario);
    if !report.feasible() {
        return Err(Error::Infeasible(Box::new(report)));
    }
    let set = FeasibleSet::new(scenario);
    let n = scenario.n_vars();
    let mut x = set.project(&vec![0.0; n])?;
    let mut g = vec![0.0; n];
    objective_gradient(scenario, &x, &mut g);

    let mut step = match options.step {
        StepRule::Fixed(s) => s,
        StepRule::Backtracking => {
            let l = lipschitz_bound(scenario);
            if l > 0.0 {
                (1.0 / l).min(MAX_STEP)
            } else {
                1.0
            }
        }
    };
    let mut trial = vec![0.0; n];
    let mut g_trial = vec![0.0; n];
    let mut pg_norm = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < options.max_iters {
        for i in 0..n {
            trial[i] = x[i] + g[i];
        }
        pg_norm = dist(&x, &set.project(&trial)?);
        if pg_norm < options.tol {
            converged = true;
            break;
        }
        iterations += 1;
        let cand = loop {
            for i in 0..n {
                trial[i] = x[i] + step * g[i];
            }
            let cand = set.project(&trial)?;
            objective_gradient(scenario, &cand, &mut g_trial);
            let StepRule::Backtracking = options.step else {
                break cand;
            };
            let mut curvature = 0.0;
            let mut d2 = 0.0;
            for i in 0..n {
                let d = cand[i] - x[i];
                curvature += (g_trial[i] - g[i]) * d;
                d2 += d * d;
            }
            if d2 == 0.0 || curvature >= -d2 / step || step < 1e-12 {
                break cand;
            }
            step *= 0.5;
        };
        if cand == x {
            // Fixed point of the projected step: optimal up to projection accuracy.
            converged = true;
            break;
        }
        x = cand;
        std::mem::swap(&mut g, &mut g_trial);
        if let StepRule::Backtracking = options.step {
            step = (2.0 * step).min(MAX_STEP);
        }
    }

    if !converged {
        log::warn!("centralized solver stopped at projected-gradient norm {pg_norm:.3e} after {iterations} iterations");
    }
    let objective = objective(scenario, &x);
    Ok(CentralizedSolution {
        plan: TransportPlan::from_amounts(scenario, x)?,
        objective,
        iterations,
        pg_norm,
        converged,
    })
}

/// Centralized optimum; logs a warning if the iteration cap was reached.
pub fn solve_centralized(scenario: &Scenario, options: &OracleOptions) -> Result<TransportPlan> {
    solve_centralized_report(scenario, options).map(|s| s.plan)
}
