//! Social utility: target utilities plus source margins plus weighted
//! fairness rewards on each target's total received amount.

use super::plan::TransportPlan;
use super::scenario::Scenario;
use crate::error::Result;

/// Objective split into its efficiency and fairness parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtilityBreakdown {
    /// `sum d + sum (s - c)` over all edges and periods.
    pub efficiency: f64,
    /// `sum_x w_x f_x(total_x)`.
    pub fairness: f64,
    /// `sum_x f_x(total_x)`, the fairness reward without weights.
    pub unweighted_fairness: f64,
}

impl UtilityBreakdown {
    pub fn total(&self) -> f64 {
        self.efficiency + self.fairness
    }
}

/// Total amount received by each target over all periods and suppliers.
pub fn target_totals(scenario: &Scenario, amounts: &[f64]) -> Vec<f64> {
    (0..scenario.n_targets())
        .map(|x| scenario.target_vars(x).iter().map(|&i| amounts[i]).sum())
        .collect()
}

/// Evaluates the objective on raw amounts laid out as in `scenario`.
pub fn breakdown(scenario: &Scenario, amounts: &[f64]) -> UtilityBreakdown {
    let horizon = scenario.horizon();
    let mut efficiency = 0.0;
    for e in 0..scenario.n_edges() {
        let f = scenario.edge_functions(e);
        for t in 0..horizon {
            let z = amounts[e * horizon + t];
            efficiency += f.d.value(z) + f.s.value(z) - f.c.value(z);
        }
    }
    let mut fairness = 0.0;
    let mut unweighted = 0.0;
    for (x, total) in target_totals(scenario, amounts).into_iter().enumerate() {
        let fx = scenario.fairness(x);
        let v = fx.function.value(total);
        unweighted += v;
        fairness += fx.weight * v;
    }
    UtilityBreakdown {
        efficiency,
        fairness,
        unweighted_fairness: unweighted,
    }
}

/// Raw-slice objective for solver inner loops; no key checking.
pub fn objective(scenario: &Scenario, amounts: &[f64]) -> f64 {
    breakdown(scenario, amounts).total()
}

/// Gradient of [`objective`] with respect to every `(edge, period)` amount.
pub fn objective_gradient(scenario: &Scenario, amounts: &[f64], grad: &mut [f64]) {
    let horizon = scenario.horizon();
    for e in 0..scenario.n_edges() {
        let f = scenario.edge_functions(e);
        for t in 0..horizon {
            let i = e * horizon + t;
            let z = amounts[i];
            grad[i] = f.d.slope(z) + f.s.slope(z) - f.c.slope(z);
        }
    }
    for (x, total) in target_totals(scenario, amounts).into_iter().enumerate() {
        let fx = scenario.fairness(x);
        let push = fx.weight * fx.function.slope(total);
        if push != 0.0 {
            for i in scenario.target_vars(x) {
                grad[i] += push;
            }
        }
    }
}

/// Social utility of a plan. The plan must be keyed exactly on the
/// scenario's edges and horizon.
pub fn social_utility(plan: &TransportPlan, scenario: &Scenario) -> Result<f64> {
    plan.check_aligned(scenario)?;
    Ok(objective(scenario, plan.amounts()))
}
