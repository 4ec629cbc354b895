//! Newline-delimited JSON trace files: one header line carrying the full
//! configuration, then one line per iteration record. Write -> read -> write
//! is byte-identical.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use tufw_core::rules::RuleKind;
use tufw_core::solvers::{IterationRecord, StepRule};

use crate::config::{ExperimentConfig, SolverKind};
use crate::HarnessError;

pub const TRACE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub version: String,
    pub solver: SolverKind,
    /// Batch rule; None for the exact-gradient baselines.
    pub rule: Option<RuleKind>,
    pub steps: StepRule,
    pub trial: u64,
    pub trial_seed: u64,
    /// Iteration reported as the solution under the configured return policy,
    /// and its objective value.
    pub returned_k: Option<u64>,
    pub returned_objective: Option<f64>,
    pub config: ExperimentConfig,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceFile {
    pub header: TraceHeader,
    pub rows: Vec<IterationRecord>,
}

impl TraceFile {
    /// Canonical file stem for one experiment cell and trial.
    pub fn file_stem(solver: SolverKind, rule: Option<RuleKind>, steps: StepRule, trial: u64) -> String {
        let rule = rule.map_or("none", |r| r.name());
        format!("{}_{}_{}_t{trial}", solver.name(), steps.name(), rule)
    }
}

pub fn write_trace(path: &Path, trace: &TraceFile) -> Result<(), HarnessError> {
    let io_err = |source| HarnessError::Io { path: path.to_path_buf(), source };
    let file = fs::File::create(path).map_err(io_err)?;
    let mut out = BufWriter::new(file);
    let mut emit = |line: String| -> Result<(), HarnessError> {
        out.write_all(line.as_bytes()).map_err(io_err)?;
        out.write_all(b"\n").map_err(io_err)
    };
    emit(serde_json::to_string(&trace.header).expect("header serializes"))?;
    for row in &trace.rows {
        emit(serde_json::to_string(row).expect("record serializes"))?;
    }
    Ok(())
}

pub fn read_trace(path: &Path) -> Result<TraceFile, HarnessError> {
    let text = fs::read_to_string(path)
        .map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })?;
    let mut lines = text.lines();
    let header_line = lines.next().ok_or_else(|| HarnessError::Trace {
        path: path.to_path_buf(),
        detail: "empty file".into(),
    })?;
    let header: TraceHeader = serde_json::from_str(header_line).map_err(|e| HarnessError::Trace {
        path: path.to_path_buf(),
        detail: format!("header: {e}"),
    })?;
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: IterationRecord = serde_json::from_str(line).map_err(|e| HarnessError::Trace {
            path: path.to_path_buf(),
            detail: format!("row {}: {e}", i + 2),
        })?;
        rows.push(row);
    }
    Ok(TraceFile { header, rows })
}

/// All `.ndjson` traces under a directory, sorted by file name.
pub fn read_trace_dir(dir: &Path) -> Result<Vec<TraceFile>, HarnessError> {
    let mut paths: Vec<_> = fs::read_dir(dir)
        .map_err(|source| HarnessError::Io { path: dir.to_path_buf(), source })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "ndjson"))
        .collect();
    paths.sort();
    paths.iter().map(|p| read_trace(p)).collect()
}
