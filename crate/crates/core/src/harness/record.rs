//! Run records and their CSV form.

use crate::error::{DpiError, Result};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

/// One iteration's metrics. Failure rows carry NaN costs but keep the
/// iteration and episode accounting.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationRow {
    pub iteration: usize,
    pub cumulative_episodes: usize,
    pub j_pi: f64,
    pub j_pi_stderr: f64,
    pub j_eta: f64,
    pub kl_measured: f64,
    pub mu: f64,
    pub beta: f64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub method: String,
    pub seed: u64,
    pub rows: Vec<IterationRow>,
}

pub const CSV_HEADER: &str =
    "method,seed,iteration,cumulative_episodes,j_pi,j_pi_stderr,j_eta,kl_measured,mu,beta,wall_ms";

impl RunRecord {
    pub fn new(method: impl Into<String>, seed: u64) -> Self {
        Self {
            method: method.into(),
            seed,
            rows: Vec::new(),
        }
    }

    /// Append a row, preserving the strictly-increasing episode invariant.
    pub fn push(&mut self, row: IterationRow) -> Result<()> {
        if let Some(last) = self.rows.last() {
            if row.cumulative_episodes <= last.cumulative_episodes {
                return Err(DpiError::invalid(
                    "cumulative episodes must be strictly increasing",
                ));
            }
        }
        self.rows.push(row);
        Ok(())
    }

    /// First cumulative-episode count at which `j_pi` drops to `threshold`
    /// or below.
    pub fn episodes_to_threshold(&self, threshold: f64) -> Option<usize> {
        self.rows
            .iter()
            .find(|r| r.j_pi.is_finite() && r.j_pi <= threshold)
            .map(|r| r.cumulative_episodes)
    }

    pub fn final_j_pi(&self) -> Option<f64> {
        self.rows.iter().rev().find(|r| r.j_pi.is_finite()).map(|r| r.j_pi)
    }

    /// Field-for-field equality of everything except wall time, compared at
    /// the bit level.
    pub fn content_equals(&self, other: &RunRecord) -> bool {
        self.seed == other.seed
            && self.rows.len() == other.rows.len()
            && self.rows.iter().zip(&other.rows).all(|(a, b)| {
                a.iteration == b.iteration
                    && a.cumulative_episodes == b.cumulative_episodes
                    && a.j_pi.to_bits() == b.j_pi.to_bits()
                    && a.j_pi_stderr.to_bits() == b.j_pi_stderr.to_bits()
                    && a.j_eta.to_bits() == b.j_eta.to_bits()
                    && a.kl_measured.to_bits() == b.kl_measured.to_bits()
                    && a.mu.to_bits() == b.mu.to_bits()
                    && a.beta.to_bits() == b.beta.to_bits()
            })
    }
}

fn fmt_f64(x: f64) -> String {
    // Debug formatting is the shortest exact round-trip representation.
    format!("{x:?}")
}

/// Write records to CSV, one row per iteration.
pub fn write_csv(records: &[RunRecord], path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for rec in records {
        for r in &rec.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                rec.method,
                rec.seed,
                r.iteration,
                r.cumulative_episodes,
                fmt_f64(r.j_pi),
                fmt_f64(r.j_pi_stderr),
                fmt_f64(r.j_eta),
                fmt_f64(r.kl_measured),
                fmt_f64(r.mu),
                fmt_f64(r.beta),
                fmt_f64(r.wall_ms),
            )
            .expect("string write cannot fail");
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Read records back, grouping consecutive rows by `(method, seed)`.
pub fn read_csv(path: &Path) -> Result<Vec<RunRecord>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => {
            return Err(DpiError::invalid(format!(
                "unexpected CSV header: {:?}",
                other.unwrap_or("")
            )))
        }
    }
    let mut records: Vec<RunRecord> = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 11 {
            return Err(DpiError::invalid(format!(
                "line {}: expected 11 fields, got {}",
                lineno + 2,
                fields.len()
            )));
        }
        let parse_f = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|e| DpiError::invalid(format!("line {}: {e}", lineno + 2)))
        };
        let method = fields[0].to_string();
        let seed: u64 = fields[1]
            .parse()
            .map_err(|e| DpiError::invalid(format!("line {}: {e}", lineno + 2)))?;
        let row = IterationRow {
            iteration: fields[2]
                .parse()
                .map_err(|e| DpiError::invalid(format!("line {}: {e}", lineno + 2)))?,
            cumulative_episodes: fields[3]
                .parse()
                .map_err(|e| DpiError::invalid(format!("line {}: {e}", lineno + 2)))?,
            j_pi: parse_f(fields[4])?,
            j_pi_stderr: parse_f(fields[5])?,
            j_eta: parse_f(fields[6])?,
            kl_measured: parse_f(fields[7])?,
            mu: parse_f(fields[8])?,
            beta: parse_f(fields[9])?,
            wall_ms: parse_f(fields[10])?,
        };
        match records.last_mut() {
            Some(rec) if rec.method == method && rec.seed == seed => rec.rows.push(row),
            _ => records.push(RunRecord {
                method,
                seed,
                rows: vec![row],
            }),
        }
    }
    Ok(records)
}
