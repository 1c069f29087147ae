//! Closed parametric family of utility, cost and fairness functions.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FunctionKind {
    /// `z -> a * z`
    Linear,
    /// `z -> a * ln(z + 1)`
    Log,
    /// `z -> a * z^2`
    Quadratic,
}

impl fmt::Display for FunctionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            FunctionKind::Linear => "linear",
            FunctionKind::Log => "log",
            FunctionKind::Quadratic => "quadratic",
        };
        f.write_str(name)
    }
}

/// The role a function plays in the objective. Utilities and the fairness
/// reward must be concave and increasing, costs convex and increasing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    TargetUtility,
    SourceUtility,
    Cost,
    Fairness,
}

impl Role {
    pub fn allows(self, kind: FunctionKind) -> bool {
        match self {
            Role::TargetUtility | Role::SourceUtility | Role::Fairness => {
                matches!(kind, FunctionKind::Linear | FunctionKind::Log)
            }
            Role::Cost => matches!(kind, FunctionKind::Linear | FunctionKind::Quadratic),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Role::TargetUtility => "d",
            Role::SourceUtility => "s",
            Role::Cost => "c",
            Role::Fairness => "fairness",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionSpec {
    pub kind: FunctionKind,
    pub coef: f64,
}

impl FunctionSpec {
    pub const fn new(kind: FunctionKind, coef: f64) -> Self {
        Self { kind, coef }
    }

    pub const fn linear(coef: f64) -> Self {
        Self::new(FunctionKind::Linear, coef)
    }

    pub const fn log(coef: f64) -> Self {
        Self::new(FunctionKind::Log, coef)
    }

    pub const fn quadratic(coef: f64) -> Self {
        Self::new(FunctionKind::Quadratic, coef)
    }

    pub const fn zero() -> Self {
        Self::linear(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.coef == 0.0
    }

    /// Checked evaluation; rejects negative or non-finite arguments.
    pub fn eval(&self, z: f64) -> Result<f64> {
        check_arg(z)?;
        Ok(self.value(z))
    }

    /// Checked first derivative.
    pub fn derivative(&self, z: f64) -> Result<f64> {
        check_arg(z)?;
        Ok(self.slope(z))
    }

    /// Unchecked evaluation for solver inner loops, where `z >= 0` holds by
    /// construction (every iterate is a projection onto a nonnegative set).
    #[inline]
    pub fn value(&self, z: f64) -> f64 {
        match self.kind {
            FunctionKind::Linear => self.coef * z,
            FunctionKind::Log => self.coef * z.ln_1p(),
            FunctionKind::Quadratic => self.coef * z * z,
        }
    }

    #[inline]
    pub fn slope(&self, z: f64) -> f64 {
        match self.kind {
            FunctionKind::Linear => self.coef,
            FunctionKind::Log => self.coef / (z + 1.0),
            FunctionKind::Quadratic => 2.0 * self.coef * z,
        }
    }

    /// Upper bound on `|f''|` over `z >= 0`.
    pub fn curvature_bound(&self) -> f64 {
        match self.kind {
            FunctionKind::Linear => 0.0,
            FunctionKind::Log => self.coef,
            FunctionKind::Quadratic => 2.0 * self.coef,
        }
    }
}

impl fmt::Display for FunctionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.kind, self.coef)
    }
}

fn check_arg(z: f64) -> Result<()> {
    if !(z >= 0.0) || !z.is_finite() {
        return Err(Error::NegativeArgument(z));
    }
    Ok(())
}
