//! Capped-simplex geometry and the strongly convex per-node subproblems.

mod simplex;
mod subproblem;

pub use simplex::{project, project_into, CappedSimplex};
pub use subproblem::{
    solve_source_subproblem, solve_target_subproblem, source_problem, target_problem,
    CoordinateTerms, InnerOptions, NodeProblem, SubproblemSolution,
};
