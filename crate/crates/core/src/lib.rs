//! Fair, efficient and dynamic optimal transport of divisible resources over
//! a bipartite source/target network.
//!
//! The distributed solver ([`admm`]) splits the problem into one strongly
//! convex subproblem per node ([`projection`]) coordinated through a
//! consensus plan and a per-edge price. [`oracle`] provides centralized and
//! brute-force reference solutions, [`online`] applies timed network changes
//! to a running solver, and [`metrics`] exports trajectories.

pub mod admm;
pub mod cli;
pub mod error;
pub mod metrics;
pub mod model;
pub mod online;
pub mod oracle;
pub mod projection;

pub use error::{Error, Result, Violation};
