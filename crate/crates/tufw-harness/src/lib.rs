//! Benchmark harness around the solver core: experiment matrices, NDJSON
//! trace persistence, reference solutions, convergence-bound checking, and
//! summary tables.

use std::path::PathBuf;

use thiserror::Error;

pub mod bounds;
pub mod config;
pub mod experiment;
pub mod fixtures;
pub mod reference;
pub mod summary;
pub mod trace_io;

pub use config::{ExperimentConfig, ProblemSource, ReturnPolicy, SolverKind};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("unknown {what} (expected one of: {expected})")]
    UnknownName { what: &'static str, expected: &'static str },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Parse(#[from] tufw_core::dataset::ParseError),
    #[error(transparent)]
    Label(#[from] tufw_core::losses::InvalidLabel),
    #[error(transparent)]
    Dataset(#[from] tufw_core::dataset::DatasetError),
    #[error(transparent)]
    Geometry(#[from] tufw_core::geometry::GeometryError),
    #[error(transparent)]
    Rule(#[from] tufw_core::rules::RuleError),
    #[error(transparent)]
    Solver(#[from] tufw_core::solvers::SolverError),
    #[error("trace file {path} is malformed: {detail}")]
    Trace { path: PathBuf, detail: String },
    #[error("reference solutions need a convex family; {family} is not")]
    NonConvexReference { family: String },
    #[error("{0}")]
    Invalid(String),
}

/// Wall clock for live runs; tests use the default null clock instead so
/// traces stay bitwise deterministic.
pub struct WallClock {
    start: std::time::Instant,
}

impl WallClock {
    pub fn new() -> Self {
        WallClock { start: std::time::Instant::now() }
    }
}

impl Default for WallClock {
    fn default() -> Self {
        Self::new()
    }
}

impl tufw_core::solvers::Clock for WallClock {
    fn elapsed_ms(&self) -> f64 {
        self.start.elapsed().as_secs_f64() * 1e3
    }
}
