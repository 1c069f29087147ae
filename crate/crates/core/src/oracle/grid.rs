//! Exhaustive lattice search for instances with at most four variables.
//!
//! Each variable ranges over `{0, h, 2h, ..}` up to the smaller of its two
//! node caps. Variables that share no node with each other are maximized
//! in closed form once the rest are fixed: the objective restricted to one
//! such variable is a concave sequence on an index interval, so a binary
//! search on adjacent differences finds its best lattice point. The
//! remaining variables are enumerated point by point. The result equals
//! brute-force enumeration of the whole lattice.

use crate::error::{Error, Result};
use crate::model::{objective, EdgeFunctions, Fairness, NodeBounds, Scenario, TransportPlan};

pub const GRID_MAX_VARS: usize = 4;
const FEAS_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct GridSolution {
    pub plan: TransportPlan,
    pub objective: f64,
}

struct Var {
    target: usize,
    source: usize,
    funcs: EdgeFunctions,
    steps: i64,
}

impl Var {
    fn edge_value(&self, z: f64) -> f64 {
        self.funcs.d.value(z) + self.funcs.s.value(z) - self.funcs.c.value(z)
    }
}

struct Lattice<'a> {
    h: f64,
    vars: Vec<Var>,
    targets: &'a [NodeBounds],
    sources: &'a [NodeBounds],
    fairness: Vec<Fairness>,
}

impl Lattice<'_> {
    fn fair(&self, x: usize, total: f64) -> f64 {
        let f = self.fairness[x];
        if f.weight == 0.0 {
            0.0
        } else {
            f.weight * f.function.value(total)
        }
    }

    /// Pairwise node-disjoint subset minimizing the number of outer points.
    fn choose_inner(&self) -> Vec<bool> {
        let n = self.vars.len();
        let mut best = (f64::INFINITY, vec![false; n]);
        for mask in 0u32..(1 << n) {
            let inner: Vec<bool> = (0..n).map(|i| mask & (1 << i) != 0).collect();
            let disjoint = (0..n).all(|i| {
                (i + 1..n).all(|j| {
                    !(inner[i] && inner[j])
                        || (self.vars[i].target != self.vars[j].target
                            && self.vars[i].source != self.vars[j].source)
                })
            });
            if !disjoint {
                continue;
            }
            let cost: f64 = (0..n)
                .filter(|&i| !inner[i])
                .map(|i| (self.vars[i].steps + 1) as f64)
                .product();
            if cost < best.0 {
                best = (cost, inner);
            }
        }
        best.1
    }

    fn search(&self) -> Option<(f64, Vec<i64>)> {
        let n = self.vars.len();
        let inner = self.choose_inner();
        let outer: Vec<usize> = (0..n).filter(|&i| !inner[i]).collect();
        let inner_vars: Vec<usize> = (0..n).filter(|&i| inner[i]).collect();
        let has_inner_t: Vec<bool> = (0..self.targets.len())
            .map(|x| inner_vars.iter().any(|&i| self.vars[i].target == x))
            .collect();
        let has_inner_s: Vec<bool> = (0..self.sources.len())
            .map(|y| inner_vars.iter().any(|&i| self.vars[i].source == y))
            .collect();

        let mut idx = vec![0i64; n];
        let mut best: Option<(f64, Vec<i64>)> = None;
        let mut t_sum = vec![0.0; self.targets.len()];
        let mut s_sum = vec![0.0; self.sources.len()];
        'outer: loop {
            t_sum.iter_mut().for_each(|v| *v = 0.0);
            s_sum.iter_mut().for_each(|v| *v = 0.0);
            let mut value = 0.0;
            for &i in &outer {
                let v = &self.vars[i];
                let z = idx[i] as f64 * self.h;
                t_sum[v.target] += z;
                s_sum[v.source] += z;
                value += v.edge_value(z);
            }
            let nodes_ok = (0..self.targets.len())
                .all(|x| has_inner_t[x] || within(t_sum[x], self.targets[x]))
                && (0..self.sources.len())
                    .all(|y| has_inner_s[y] || within(s_sum[y], self.sources[y]));
            let mut feasible = nodes_ok;
            if feasible {
                for x in (0..self.targets.len()).filter(|&x| !has_inner_t[x]) {
                    value += self.fair(x, t_sum[x]);
                }
                for &j in &inner_vars {
                    match self.best_inner(j, t_sum[self.vars[j].target], s_sum[self.vars[j].source])
                    {
                        Some((i, v)) => {
                            idx[j] = i;
                            value += v;
                        }
                        None => {
                            feasible = false;
                            break;
                        }
                    }
                }
            }
            if feasible && best.as_ref().is_none_or(|(b, _)| value > *b) {
                best = Some((value, idx.clone()));
            }

            // odometer over the outer variables
            for &i in outer.iter().rev() {
                if idx[i] < self.vars[i].steps {
                    idx[i] += 1;
                    continue 'outer;
                }
                idx[i] = 0;
            }
            break;
        }
        best
    }

    /// Best lattice index of inner variable `j` given the other amounts at
    /// its two nodes, with the value of every term that depends on it.
    fn best_inner(&self, j: usize, rest_t: f64, rest_s: f64) -> Option<(i64, f64)> {
        let v = &self.vars[j];
        let (tb, sb) = (self.targets[v.target], self.sources[v.source]);
        let lo_val = (tb.lo - rest_t).max(sb.lo - rest_s);
        let hi_val = (tb.hi - rest_t).min(sb.hi - rest_s);
        let mut lo = (((lo_val - FEAS_TOL) / self.h).ceil() as i64).max(0);
        let mut hi = (((hi_val + FEAS_TOL) / self.h).floor() as i64).min(v.steps);
        if lo > hi {
            return None;
        }
        let value = |i: i64| {
            let z = i as f64 * self.h;
            v.edge_value(z) + self.fair(v.target, rest_t + z)
        };
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if value(mid) < value(mid + 1) {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        Some((lo, value(lo)))
    }
}

fn within(sum: f64, b: NodeBounds) -> bool {
    sum >= b.lo - FEAS_TOL && sum <= b.hi + FEAS_TOL
}

/// Best feasible point of the lattice with step `resolution`.
pub fn grid_oracle(scenario: &Scenario, resolution: f64) -> Result<GridSolution> {
    let n = scenario.n_vars();
    if n > GRID_MAX_VARS {
        return Err(Error::DimensionGuard {
            max: GRID_MAX_VARS,
            got: n,
        });
    }
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(Error::InvalidOption(format!(
            "grid resolution must be positive, got {resolution}"
        )));
    }
    let bounds = scenario.bounds();
    let horizon = scenario.horizon();
    let vars = (0..n)
        .map(|i| {
            let e = i / horizon;
            let (target, source) = scenario.network().edges()[e];
            let cap = bounds.targets[target].hi.min(bounds.sources[source].hi);
            Var {
                target,
                source,
                funcs: *scenario.edge_functions(e),
                steps: ((cap + FEAS_TOL) / resolution).floor() as i64,
            }
        })
        .collect();
    let lattice = Lattice {
        h: resolution,
        vars,
        targets: &bounds.targets,
        sources: &bounds.sources,
        fairness: (0..scenario.n_targets())
            .map(|x| *scenario.fairness(x))
            .collect(),
    };
    let (_, idx) = lattice.search().ok_or_else(|| {
        Error::EmptyFeasibleSet(format!(
            "no feasible point on the lattice with step {resolution}"
        ))
    })?;
    let amounts: Vec<f64> = idx.iter().map(|&i| i as f64 * resolution).collect();
    let objective = objective(scenario, &amounts);
    Ok(GridSolution {
        plan: TransportPlan::from_amounts(scenario, amounts)?,
        objective,
    })
}
