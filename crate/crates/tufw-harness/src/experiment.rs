//! The experiment matrix runner: (solver x rule x trial) cells dispatched to a
//! bounded worker pool, one trace file per cell, a summary after the join.

use std::collections::VecDeque;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tufw_core::rules::{RuleKind, RuleSpec};
use tufw_core::solvers::{fw_ada_run, standard_fw_run, tufw_run, RunOptions, RunResult};
use tufw_core::{FeasibleSet, Problem};

use crate::config::{ExperimentConfig, ReturnPolicy, SolverKind};
use crate::summary::{summarize, SummaryReport};
use crate::trace_io::{write_trace, TraceFile, TraceHeader, TRACE_VERSION};
use crate::{HarnessError, WallClock};

#[derive(Clone, Debug)]
pub struct FailedCell {
    pub solver: SolverKind,
    pub rule: Option<RuleKind>,
    pub trial: u64,
    pub error: String,
}

#[derive(Debug)]
pub struct ExperimentOutcome {
    pub trace_paths: Vec<PathBuf>,
    pub failed: Vec<FailedCell>,
    pub summary: SummaryReport,
    pub summary_path: PathBuf,
}

impl ExperimentOutcome {
    pub fn ok(&self) -> bool {
        self.failed.is_empty()
    }
}

struct Job {
    solver: SolverKind,
    rule: Option<RuleKind>,
    trial: u64,
}

/// Runs every (solver, rule, trial) cell of the config, writing one NDJSON
/// trace per cell into `out_dir` plus a `summary.json`. A failing cell is
/// recorded and the rest of the matrix still runs. With `use_wall_clock`
/// off, outputs are bitwise deterministic.
pub fn run_experiment(
    config: &ExperimentConfig,
    out_dir: &Path,
    use_wall_clock: bool,
) -> Result<ExperimentOutcome, HarnessError> {
    std::fs::create_dir_all(out_dir)
        .map_err(|source| HarnessError::Io { path: out_dir.to_path_buf(), source })?;
    let (problem, remap) = config.load_problem()?;
    if let Some(remap) = remap {
        eprintln!("note: labels remapped ({remap:?}) to match the {} loss", config.loss);
    }
    let set = config.feasible_set()?;

    let mut jobs = VecDeque::new();
    for &solver in &config.solvers {
        let rules: Vec<Option<RuleKind>> = match solver {
            SolverKind::Tufw => config.rules.iter().copied().map(Some).collect(),
            _ => vec![None],
        };
        for rule in rules {
            for trial in 0..config.trials {
                jobs.push_back(Job { solver, rule, trial });
            }
        }
    }
    if jobs.is_empty() {
        return Err(HarnessError::Invalid("empty experiment matrix (no solvers?)".into()));
    }

    let total_jobs = jobs.len();
    let queue = Mutex::new(jobs);
    type CellResult = (String, SolverKind, Option<RuleKind>, u64, Result<TraceFile, HarnessError>);
    let results: Mutex<Vec<CellResult>> = Mutex::new(Vec::new());
    let workers = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(total_jobs)
        .max(1);

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let job = match queue.lock().unwrap().pop_front() {
                    Some(job) => job,
                    None => break,
                };
                let stem =
                    TraceFile::file_stem(job.solver, job.rule, config.steps, job.trial);
                let outcome = run_cell(&problem, &set, config, &job, use_wall_clock);
                results
                    .lock()
                    .unwrap()
                    .push((stem, job.solver, job.rule, job.trial, outcome));
            });
        }
    });

    let mut results = results.into_inner().unwrap();
    results.sort_by(|a, b| a.0.cmp(&b.0));

    let mut trace_paths = Vec::new();
    let mut traces = Vec::new();
    let mut failed = Vec::new();
    for (stem, solver, rule, trial, outcome) in results {
        match outcome {
            Ok(trace) => {
                let path = out_dir.join(format!("{stem}.ndjson"));
                write_trace(&path, &trace)?;
                trace_paths.push(path);
                traces.push(trace);
            }
            Err(e) => failed.push(FailedCell { solver, rule, trial, error: e.to_string() }),
        }
    }

    let summary = summarize(&traces);
    let summary_path = out_dir.join("summary.json");
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    std::fs::write(&summary_path, json)
        .map_err(|source| HarnessError::Io { path: summary_path.clone(), source })?;

    Ok(ExperimentOutcome { trace_paths, failed, summary, summary_path })
}

fn run_cell(
    problem: &Problem,
    set: &FeasibleSet,
    config: &ExperimentConfig,
    job: &Job,
    use_wall_clock: bool,
) -> Result<TraceFile, HarnessError> {
    let trial_seed = config.trial_seed(job.trial);
    let capture_at = match config.return_policy {
        ReturnPolicy::UniformRandom => {
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
            rng.set_stream(u64::MAX); // keep clear of the per-iteration streams
            Some(rng.gen_range(0..=config.iters))
        }
        _ => None,
    };
    let clock = use_wall_clock.then(WallClock::new);
    let opts = RunOptions {
        gap_every: Some(config.effective_gap_every(problem.n())),
        record_every: 1,
        early_stop_gap: config.stop_at_gap,
        capture_at,
        clock: clock.as_ref().map(|c| c as &dyn tufw_core::solvers::Clock),
    };

    let result: RunResult = match job.solver {
        SolverKind::Tufw => {
            let kind = job.rule.expect("tufw cells carry a rule");
            let horizon = config.rule_horizon.or(kind.needs_horizon().then_some(config.iters));
            let rule = RuleSpec::new(kind, horizon, config.sampling, trial_seed)?;
            tufw_run(
                problem,
                set,
                &rule,
                config.steps,
                config.iters,
                None,
                config.hmode,
                &opts,
                |_| {},
            )?
        }
        SolverKind::Fw => {
            standard_fw_run(problem, set, config.steps, config.iters, None, &opts)?
        }
        SolverKind::FwAda => fw_ada_run(problem, set, config.iters, None, &opts)?,
    };

    let (returned_k, returned_x) = match config.return_policy {
        ReturnPolicy::Last => (Some(config.iters + 1), Some(result.x_final.clone())),
        ReturnPolicy::BestGap => (
            result.best_gap.map(|(k, _)| k),
            result.best_gap_x.clone(),
        ),
        ReturnPolicy::UniformRandom => (capture_at, result.x_captured.clone()),
    };
    let returned_objective = returned_x.as_ref().map(|x| problem.objective(x));

    Ok(TraceFile {
        header: TraceHeader {
            version: TRACE_VERSION.into(),
            solver: job.solver,
            rule: job.rule,
            steps: config.steps,
            trial: job.trial,
            trial_seed,
            returned_k,
            returned_objective,
            config: config.clone(),
        },
        rows: result.trace.rows,
    })
}
