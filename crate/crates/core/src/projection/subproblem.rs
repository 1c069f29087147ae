//! Per-node proximal subproblems.
//!
//! Each target and each source minimizes its own negated payoff plus a
//! linear price term and a proximal pull toward the current consensus plan,
//! over its capped-simplex feasible set. The proximal term makes every
//! subproblem strongly convex, so projected gradient with Armijo
//! backtracking converges linearly to the unique minimizer.

use super::simplex::{project_into, CappedSimplex};
use crate::model::{FunctionSpec, Scenario};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerOptions {
    /// Stop once the projected-gradient norm drops below this.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for InnerOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iters: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemSolution {
    pub point: Vec<f64>,
    pub iterations: usize,
    /// `|| v - P(v - grad) ||` at the returned point.
    pub pg_norm: f64,
    /// False when the inner iteration cap was hit; `point` is then the
    /// best iterate found.
    pub converged: bool,
}

/// Separable part of one coordinate: `-utility(v) + cost(v)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoordinateTerms {
    pub utility: FunctionSpec,
    pub cost: FunctionSpec,
}

/// `min sum_i [terms_i(v_i) + price_i v_i + eta/2 (v_i - center_i)^2]
///      - weight * reward(sum v)` over a capped simplex.
#[derive(Debug, Clone)]
pub struct NodeProblem {
    pub set: CappedSimplex,
    pub terms: Vec<CoordinateTerms>,
    pub price: Vec<f64>,
    pub center: Vec<f64>,
    pub reward: Option<(f64, FunctionSpec)>,
    pub eta: f64,
}

impl NodeProblem {
    pub fn value(&self, v: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (i, &z) in v.iter().enumerate() {
            let t = &self.terms[i];
            let dz = z - self.center[i];
            acc += -t.utility.value(z)
                + t.cost.value(z)
                + self.price[i] * z
                + 0.5 * self.eta * dz * dz;
        }
        if let Some((w, f)) = self.reward {
            acc -= w * f.value(v.iter().sum());
        }
        acc
    }

    pub fn gradient(&self, v: &[f64], g: &mut [f64]) {
        let shared = match self.reward {
            Some((w, f)) => -w * f.slope(v.iter().sum()),
            None => 0.0,
        };
        for (i, &z) in v.iter().enumerate() {
            let t = &self.terms[i];
            g[i] = -t.utility.slope(z)
                + t.cost.slope(z)
                + self.price[i]
                + self.eta * (z - self.center[i])
                + shared;
        }
    }

    /// `|| v - P(v - grad(v)) ||_2`.
    pub fn pg_norm(&self, v: &[f64]) -> f64 {
        let mut g = vec![0.0; v.len()];
        self.gradient(v, &mut g);
        let trial: Vec<f64> = v.iter().zip(&g).map(|(a, b)| a - b).collect();
        let mut p = vec![0.0; v.len()];
        project_into(&trial, &self.set, &mut p);
        v.iter()
            .zip(&p)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Projected gradient with backtracking, started from `start`
    /// (projected first).
    ///
    /// A step `s` is accepted when the curvature along the move satisfies
    /// `(grad(w) - grad(v)) . (w - v) <= |w - v|^2 / s`, i.e. the local
    /// Lipschitz estimate is at most `1 / s`. Unlike a comparison of function
    /// values this test stays reliable when successive values agree to
    /// rounding error near the minimizer.
    pub fn solve_from(&self, start: &[f64], opts: &InnerOptions) -> SubproblemSolution {
        let n = start.len();
        let mut v = vec![0.0; n];
        project_into(start, &self.set, &mut v);
        let mut g = vec![0.0; n];
        let mut gw = vec![0.0; n];
        let mut trial = vec![0.0; n];
        let mut w = vec![0.0; n];
        let max_step = 1.0 / self.eta;
        let mut step = max_step;
        let mut pg_norm = f64::INFINITY;
        self.gradient(&v, &mut g);

        for it in 0..opts.max_iters {
            for i in 0..n {
                trial[i] = v[i] - g[i];
            }
            project_into(&trial, &self.set, &mut w);
            pg_norm = dist(&v, &w);
            if pg_norm < opts.tol {
                return SubproblemSolution {
                    point: v,
                    iterations: it,
                    pg_norm,
                    converged: true,
                };
            }

            loop {
                for i in 0..n {
                    trial[i] = v[i] - step * g[i];
                }
                project_into(&trial, &self.set, &mut w);
                self.gradient(&w, &mut gw);
                let mut curv = 0.0;
                let mut sq = 0.0;
                for i in 0..n {
                    let d = w[i] - v[i];
                    curv += (gw[i] - g[i]) * d;
                    sq += d * d;
                }
                if curv <= sq / step || step < 1e-30 {
                    std::mem::swap(&mut v, &mut w);
                    std::mem::swap(&mut g, &mut gw);
                    break;
                }
                step *= 0.5;
            }
            step = (step * 2.0).min(max_step);
        }

        SubproblemSolution {
            point: v,
            iterations: opts.max_iters,
            pg_norm,
            converged: false,
        }
    }

    pub fn solve(&self, opts: &InnerOptions) -> SubproblemSolution {
        self.solve_from(&self.center, opts)
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Builds the target-side problem for target `x`: maximize utility plus the
/// weighted fairness reward, pay `alpha` per unit, stay near `pi`.
///
/// `pi` and `alpha` are full-length arrays in the scenario's variable
/// layout; the problem's coordinates follow [`Scenario::target_vars`].
pub fn target_problem(
    scenario: &Scenario,
    x: usize,
    pi: &[f64],
    alpha: &[f64],
    eta: f64,
) -> NodeProblem {
    let vars = scenario.target_vars(x);
    let horizon = scenario.horizon();
    let b = scenario.bounds().targets[x];
    let zero = FunctionSpec::zero();
    let terms = vars
        .iter()
        .map(|&i| CoordinateTerms {
            utility: scenario.edge_functions(i / horizon).d,
            cost: zero,
        })
        .collect();
    let fair = scenario.fairness(x);
    NodeProblem {
        set: CappedSimplex::new(vars.len(), b.lo, b.hi).expect("validated bounds"),
        terms,
        price: vars.iter().map(|&i| alpha[i]).collect(),
        center: vars.iter().map(|&i| pi[i]).collect(),
        reward: (fair.weight > 0.0).then_some((fair.weight, fair.function)),
        eta,
    }
}

/// Builds the source-side problem for source `y`: maximize utility minus
/// transport cost, receive `alpha` per unit, stay near `pi`.
pub fn source_problem(
    scenario: &Scenario,
    y: usize,
    pi: &[f64],
    alpha: &[f64],
    eta: f64,
) -> NodeProblem {
    let vars = scenario.source_vars(y);
    let horizon = scenario.horizon();
    let b = scenario.bounds().sources[y];
    let terms = vars
        .iter()
        .map(|&i| {
            let f = scenario.edge_functions(i / horizon);
            CoordinateTerms {
                utility: f.s,
                cost: f.c,
            }
        })
        .collect();
    NodeProblem {
        set: CappedSimplex::new(vars.len(), b.lo, b.hi).expect("validated bounds"),
        terms,
        price: vars.iter().map(|&i| -alpha[i]).collect(),
        center: vars.iter().map(|&i| pi[i]).collect(),
        reward: None,
        eta,
    }
}

pub fn solve_target_subproblem(
    scenario: &Scenario,
    x: usize,
    pi: &[f64],
    alpha: &[f64],
    eta: f64,
    opts: &InnerOptions,
) -> SubproblemSolution {
    target_problem(scenario, x, pi, alpha, eta).solve(opts)
}

pub fn solve_source_subproblem(
    scenario: &Scenario,
    y: usize,
    pi: &[f64],
    alpha: &[f64],
    eta: f64,
    opts: &InnerOptions,
) -> SubproblemSolution {
    source_problem(scenario, y, pi, alpha, eta).solve(opts)
}
