//! Sufficient feasibility conditions on supply and demand.
//!
//! A scenario is declared feasible when every target's lower demand can be
//! covered by the combined capacity of its own suppliers, and the total
//! capacity covers the total lower demand. The conditions are sufficient
//! only; failing them means "not guaranteed feasible".

use std::fmt;

use super::scenario::Scenario;

#[derive(Debug, Clone, PartialEq)]
pub struct TargetCondition {
    pub target: String,
    /// Sum of upper capacities of the target's suppliers.
    pub supplier_capacity: f64,
    pub demand_lo: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    pub per_target: Vec<TargetCondition>,
    pub total_capacity: f64,
    pub total_demand_lo: f64,
    pub total_holds: bool,
}

impl FeasibilityReport {
    pub fn per_target_holds(&self) -> bool {
        self.per_target.iter().all(|c| c.holds)
    }

    pub fn feasible(&self) -> bool {
        self.per_target_holds() && self.total_holds
    }

    pub fn violating_targets(&self) -> impl Iterator<Item = &TargetCondition> {
        self.per_target.iter().filter(|c| !c.holds)
    }
}

impl fmt::Display for FeasibilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.per_target_holds() {
            writeln!(f, "supply condition (per-target): holds")?;
        } else {
            writeln!(f, "supply condition (per-target) violated")?;
            for c in self.violating_targets() {
                writeln!(
                    f,
                    "  target {}: supplier capacity {} < lower demand {}",
                    c.target, c.supplier_capacity, c.demand_lo
                )?;
            }
        }
        if self.total_holds {
            writeln!(
                f,
                "supply condition (total): holds ({} >= {})",
                self.total_capacity, self.total_demand_lo
            )?;
        } else {
            writeln!(
                f,
                "supply condition (total) violated: capacity {} < lower demand {}",
                self.total_capacity, self.total_demand_lo
            )?;
        }
        write!(
            f,
            "{}",
            if self.feasible() {
                "feasible"
            } else {
                "not guaranteed feasible"
            }
        )
    }
}

pub fn check_feasibility(scenario: &Scenario) -> FeasibilityReport {
    let net = scenario.network();
    let bounds = scenario.bounds();
    let per_target = (0..scenario.n_targets())
        .map(|x| {
            let supplier_capacity: f64 = net.suppliers_of(x).map(|y| bounds.sources[y].hi).sum();
            let demand_lo = bounds.targets[x].lo;
            TargetCondition {
                target: net.targets()[x].clone(),
                supplier_capacity,
                demand_lo,
                holds: supplier_capacity >= demand_lo,
            }
        })
        .collect();
    let total_capacity: f64 = bounds.sources.iter().map(|b| b.hi).sum();
    let total_demand_lo: f64 = bounds.targets.iter().map(|b| b.lo).sum();
    FeasibilityReport {
        per_target,
        total_capacity,
        total_demand_lo,
        total_holds: total_capacity >= total_demand_lo,
    }
}
