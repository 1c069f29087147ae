//! Trajectory metrics and CSV export.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::TransportPlan;

pub const CSV_HEADER: &str = "k,social_utility,primal_residual,reference_residual,segment";

/// One sampled solver iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub k: u64,
    /// Objective evaluated on the consensus plan, which may be slightly
    /// infeasible before convergence.
    pub social_utility: f64,
    /// `max |pi_d - pi_s|` over all `(edge, period)`.
    pub primal_residual: f64,
    /// Euclidean distance to a reference plan, when one was supplied.
    pub reference_residual: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub records: Vec<IterationRecord>,
    /// Iteration counts at which online events were applied. Iteration `k`
    /// belongs to segment `#{ m in markers : m < k }`.
    pub markers: Vec<u64>,
}

impl Trajectory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, record: IterationRecord) {
        self.records.push(record);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn segment_of(&self, k: u64) -> usize {
        self.markers.iter().filter(|&&m| m < k).count()
    }

    /// Records belonging to segment `index`.
    pub fn segment(&self, index: usize) -> impl Iterator<Item = &IterationRecord> {
        self.records
            .iter()
            .filter(move |r| self.segment_of(r.k) == index)
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    /// Writes the trajectory as CSV (UTF-8, LF line endings).
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        for r in &self.records {
            write!(
                out,
                "{},{},{},",
                r.k,
                fmt_float(r.social_utility),
                fmt_float(r.primal_residual)
            )?;
            if let Some(v) = r.reference_residual {
                write!(out, "{}", fmt_float(v))?;
            }
            writeln!(out, ",{}", self.segment_of(r.k))?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv output is ASCII")
    }
}

/// 17 significant digits, which round-trips every finite `f64`.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Euclidean distance between two plans over all `(edge, period)` keys.
pub fn residual_to_reference(plan: &TransportPlan, reference: &TransportPlan) -> Result<f64> {
    plan.check_same_keys(reference)?;
    Ok(raw_distance(plan.amounts(), reference.amounts()))
}

pub(crate) fn raw_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn export_csv(trajectory: &Trajectory, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    trajectory
        .write_csv(&mut out)
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}
