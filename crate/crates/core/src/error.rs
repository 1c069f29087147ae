use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

use crate::model::FeasibilityReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// A single violated scenario invariant, with the offending node or edge.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub subject: String,
    pub message: String,
}

impl Violation {
    pub fn new(subject: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            subject: subject.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.subject, self.message)
    }
}

fn join(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid scenario: {}", join(.0))]
    Validation(Vec<Violation>),

    #[error("scenario not guaranteed feasible: {0}")]
    Infeasible(Box<FeasibilityReport>),

    #[error("function argument must be a finite nonnegative number, got {0}")]
    NegativeArgument(f64),

    #[error("plan keys do not match: {0}")]
    KeyMismatch(String),

    #[error("grid oracle supports at most {max} variables, scenario has {got}")]
    DimensionGuard { max: usize, got: usize },

    #[error("invalid option: {0}")]
    InvalidOption(String),

    #[error("feasible set appears empty: {0}")]
    EmptyFeasibleSet(String),

    #[error("event {index} (at iteration {at}): {reason}")]
    Event {
        index: usize,
        at: u64,
        reason: String,
    },

    #[error("invalid event schedule: {0}")]
    Schedule(String),

    #[error("failed to parse {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
