//! Reference solvers: a centralized projected-gradient solver of the full
//! problem and a lattice-search oracle for tiny instances.

mod centralized;
mod grid;

pub use centralized::{
    project_feasible, solve_centralized, solve_centralized_report, CentralizedSolution,
};
pub use grid::{grid_oracle, GridSolution, GRID_MAX_VARS};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    Fixed(f64),
    /// Adaptive step, halved until a local curvature test passes and
    /// doubled after each accepted step.
    Backtracking,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    pub step: StepRule,
    /// Target projected-gradient norm.
    pub tol: f64,
    pub max_iters: usize,
    /// Lattice step of the grid oracle.
    pub grid_resolution: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            step: StepRule::Backtracking,
            tol: 1e-9,
            max_iters: 200_000,
            grid_resolution: 1e-3,
        }
    }
}

impl OracleOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidOption(format!(
                "oracle tol must be positive, got {}",
                self.tol
            )));
        }
        if !(self.grid_resolution > 0.0) {
            return Err(Error::InvalidOption(format!(
                "grid resolution must be positive, got {}",
                self.grid_resolution
            )));
        }
        if let StepRule::Fixed(s) = self.step {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::InvalidOption(format!(
                    "fixed step must be positive, got {s}"
                )));
            }
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidOption(
                "oracle max_iters must be at least 1".into(),
            ));
        }
        Ok(())
    }
}
