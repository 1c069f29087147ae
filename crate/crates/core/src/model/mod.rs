//! Transport networks, parametric functions, scenarios and plans.

mod document;
mod feasibility;
mod function;
mod objective;
mod plan;
mod scenario;

pub use document::{
    load_scenario, BoundsDocument, EdgeDocument, FairnessDocument, ScenarioBuilder,
    ScenarioDocument, SourceBounds, TargetBounds,
};
pub use feasibility::{check_feasibility, FeasibilityReport, TargetCondition};
pub use function::{FunctionKind, FunctionSpec, Role};
pub use objective::{
    breakdown, objective, objective_gradient, social_utility, target_totals, UtilityBreakdown,
};
pub use plan::{EdgeKey, PlanDocument, PlanEntry, TransportPlan};
pub use scenario::{
    build_scenario, Bounds, EdgeFunctions, Fairness, Network, NodeBounds, Scenario,
};

/// Shorthand for `eval` on a spec.
pub fn eval_function(spec: &FunctionSpec, z: f64) -> crate::Result<f64> {
    spec.eval(z)
}
