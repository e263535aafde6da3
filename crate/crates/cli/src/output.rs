//! Tables, assertions and the files they are written to.

use crate::config::Format;
use rwde::stats::Estimate;
use serde::Serialize;
use std::path::{Path, PathBuf};

/// One CSV file. Cells are formatted once, so reruns are byte-identical.
#[derive(Debug, Clone, Serialize)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

pub fn cell(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x}")
    }
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table { name: name.into(), header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: impl IntoIterator<Item = String>) {
        let row: Vec<String> = row.into_iter().collect();
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn push_f64(&mut self, row: &[f64]) {
        self.push(row.iter().map(|&x| cell(x)));
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Assertion {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub reference_only: bool,
}

impl Assertion {
    /// `|est − target| ≤ window + k·se`.
    pub fn within(name: impl Into<String>, est: Estimate, target: f64, k: f64, window: f64) -> Self {
        let tolerance = window + k * est.se;
        Assertion { name: name.into(), lhs: est.mean, rhs: target, tolerance, pass: (est.mean - target).abs() <= tolerance, reference_only: false }
    }

    pub fn at_most(name: impl Into<String>, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        Assertion { name: name.into(), lhs, rhs, tolerance, pass: lhs <= rhs + tolerance, reference_only: false }
    }

    pub fn at_least(name: impl Into<String>, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        Assertion { name: name.into(), lhs, rhs, tolerance, pass: lhs >= rhs - tolerance, reference_only: false }
    }

    pub fn equals(name: impl Into<String>, got: bool, want: bool) -> Self {
        let b = |v: bool| if v { 1.0 } else { 0.0 };
        Assertion { name: name.into(), lhs: b(got), rhs: b(want), tolerance: 0.0, pass: got == want, reference_only: false }
    }

    pub fn reference(mut self, yes: bool) -> Self {
        self.reference_only = yes;
        self
    }
}

/// Result of one suite before metadata is attached.
#[derive(Debug, Default)]
pub struct Outcome {
    pub tables: Vec<Table>,
    pub assertions: Vec<Assertion>,
    pub report: serde_json::Value,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.pass || a.reference_only)
    }
}

#[derive(Debug, Serialize)]
pub struct Metadata {
    pub kind: String,
    pub seed: u64,
    pub replicas: usize,
    pub threads: usize,
    pub git_describe: String,
    pub wall_time_s: f64,
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    assertions: &'a [Assertion],
    pass: bool,
    metadata: &'a Metadata,
    report: &'a serde_json::Value,
}

pub fn git_describe() -> String {
    std::process::Command::new("git")
        .args(["describe", "--always", "--dirty"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unknown".into())
}

#[derive(Debug, thiserror::Error)]
pub enum WriteError {
    #[error("cannot write {path}: {msg}")]
    Io { path: PathBuf, msg: String },
}

fn io(path: &Path, e: impl std::fmt::Display) -> WriteError {
    WriteError::Io { path: path.to_path_buf(), msg: e.to_string() }
}

/// Writes `<kind>_<table>.csv` and `<kind>_summary.json`; returns the paths.
pub fn write(dir: &Path, format: Format, outcome: &Outcome, meta: &Metadata) -> Result<Vec<PathBuf>, WriteError> {
    std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let mut written = Vec::new();
    if format != Format::Json {
        for t in &outcome.tables {
            let path = dir.join(format!("{}_{}.csv", meta.kind, t.name));
            let mut w = csv::Writer::from_path(&path).map_err(|e| io(&path, e))?;
            w.write_record(&t.header).map_err(|e| io(&path, e))?;
            for r in &t.rows {
                w.write_record(r).map_err(|e| io(&path, e))?;
            }
            w.flush().map_err(|e| io(&path, e))?;
            written.push(path);
        }
    }
    if format != Format::Csv {
        let path = dir.join(format!("{}_summary.json", meta.kind));
        let s = Summary { assertions: &outcome.assertions, pass: outcome.passed(), metadata: meta, report: &outcome.report };
        let text = serde_json::to_string_pretty(&s).map_err(|e| io(&path, e))?;
        std::fs::write(&path, text + "\n").map_err(|e| io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn assertion_helpers() {
        let e = Estimate { mean: 1.1, se: 0.05, n: 100, seed: None };
        assert!(Assertion::within("a", e, 1.0, 3.0, 0.0).pass);
        assert!(!Assertion::within("a", e, 1.0, 1.0, 0.0).pass);
        assert!(Assertion::at_most("b", 1.0, 0.9, 0.1).pass);
        assert!(!Assertion::at_least("c", 0.5, 0.9, 0.1).pass);
        let o = Outcome { assertions: vec![Assertion::equals("d", true, false).reference(true)], ..Default::default() };
        assert!(o.passed());
    }

    #[test]
    fn nan_cells_are_empty() {
        assert_eq!(cell(f64::NAN), "");
        assert_eq!(cell(0.25), "0.25");
    }
}
