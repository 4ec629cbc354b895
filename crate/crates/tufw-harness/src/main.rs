//! `tufw` command-line benchmark runner.

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use tufw_core::geometry::{Norm, SetKind};
use tufw_core::losses::LossFamily;
use tufw_core::rules::{RuleKind, Sampling};
use tufw_core::solvers::StepRule;
use tufw_core::taylor::HessianMode;

use tufw_harness::bounds::{
    best_observed_objective, check_convex, check_nonconvex, problem_constants, BoundKind,
};
use tufw_harness::config::{load_problem, ExperimentConfig, ProblemSource, ReturnPolicy, SolverKind};
use tufw_harness::experiment::run_experiment;
use tufw_harness::reference::{compute_reference, problem_fingerprint, ReferenceSolution, DEFAULT_REFERENCE_ITERS};
use tufw_harness::summary::summarize;
use tufw_harness::trace_io::{read_trace, read_trace_dir, TraceFile};

#[derive(Parser)]
#[command(name = "tufw", version, about = "Projection-free constrained ERM solver benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment matrix and write trace files plus a summary.
    Run(RunArgs),
    /// Compute a reference solution (long baseline run) for a convex problem.
    Reference(ReferenceArgs),
    /// Check recorded traces against a convergence bound.
    Check(CheckArgs),
    /// Recompute the summary table from a directory of trace files.
    Summarize(SummarizeArgs),
}

/// `n,p,seed` triple for synthetic problems.
#[derive(Clone, Copy, Debug)]
struct SynthSpec {
    n: usize,
    p: usize,
    seed: u64,
}

impl FromStr for SynthSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(',').collect();
        if parts.len() != 3 {
            return Err("expected n,p,seed".into());
        }
        Ok(SynthSpec {
            n: parts[0].trim().parse().map_err(|e| format!("n: {e}"))?,
            p: parts[1].trim().parse().map_err(|e| format!("p: {e}"))?,
            seed: parts[2].trim().parse().map_err(|e| format!("seed: {e}"))?,
        })
    }
}

#[derive(Args)]
struct ProblemArgs {
    /// LIBSVM-format dataset file.
    #[arg(long, value_name = "PATH")]
    data: Option<PathBuf>,
    /// Synthetic problem instead of a file, as n,p,seed.
    #[arg(long, value_name = "N,P,SEED", conflicts_with = "data")]
    synth: Option<SynthSpec>,
    /// Widen the variable dimension beyond the largest index in the file.
    #[arg(long)]
    dims: Option<usize>,
    #[arg(long, default_value = "logistic")]
    loss: LossFamily,
    /// Primal norm on the variable space (feature bound uses its dual).
    #[arg(long, default_value = "l1")]
    norm: Norm,
    #[arg(long, default_value = "l1")]
    set: SetKind,
    #[arg(long, default_value_t = 10.0)]
    lambda: f64,
}

impl ProblemArgs {
    fn source(&self) -> Result<ProblemSource> {
        match (&self.data, &self.synth) {
            (Some(path), None) => {
                Ok(ProblemSource::Data { path: path.clone(), dims: self.dims })
            }
            (None, Some(s)) => Ok(ProblemSource::Synth { n: s.n, p: s.p, seed: s.seed }),
            (None, None) => bail!("one of --data or --synth is required"),
            (Some(_), Some(_)) => unreachable!("clap rejects the combination"),
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Solvers to run (comma separated).
    #[arg(long, value_delimiter = ',', default_value = "tufw")]
    solver: Vec<SolverKindArg>,
    /// Batch rules for the tufw solver (comma separated).
    #[arg(long, value_delimiter = ',', default_value = "dbd-sqrt")]
    rule: Vec<RuleKind>,
    #[arg(long, default_value = "harmonic")]
    steps: StepRule,
    /// Iteration horizon K; each run executes iterations 0..=K.
    #[arg(long, default_value_t = 1000)]
    iters: u64,
    /// Rule horizon for the fourth-root rules (defaults to --iters).
    #[arg(long = "K", value_name = "K")]
    rule_horizon: Option<u64>,
    #[arg(long, default_value_t = 1)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "cyclic")]
    sampling: Sampling,
    #[arg(long, default_value = "dense")]
    hmode: HessianMode,
    /// Evaluate the offline gap every m iterations (default: auto policy).
    #[arg(long, value_name = "M")]
    gap_every: Option<u64>,
    /// Stop a run early once the evaluated gap reaches this value.
    #[arg(long, value_name = "EPS")]
    stop_at_gap: Option<f64>,
    /// Gap targets for the first-hit summary columns (comma separated).
    #[arg(long = "eps", value_delimiter = ',', default_value = "0.1,0.001")]
    eps_targets: Vec<f64>,
    /// Which iterate to report as the solution.
    #[arg(long = "return", default_value = "last")]
    return_policy: ReturnPolicyArg,
    /// Output directory (default: $TUFW_OUT or ./runs).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReferenceArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, default_value_t = DEFAULT_REFERENCE_ITERS)]
    iters: u64,
    /// Where to write the reference JSON.
    #[arg(long, default_value = "reference.json")]
    out: PathBuf,
}

#[derive(Args)]
struct CheckArgs {
    /// Trace files to check (one experiment cell's trials).
    #[arg(long = "trace", value_name = "PATH")]
    traces: Vec<PathBuf>,
    /// Or: read every trace in this directory.
    #[arg(long, conflicts_with = "traces")]
    dir: Option<PathBuf>,
    /// Which guarantee to evaluate.
    #[arg(long, alias = "theorem")]
    bound: BoundKindArg,
    /// Reference solution (required for the convex bounds).
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Slack multiplier (default: 1 for deterministic, 2 for expectation bounds).
    #[arg(long)]
    slack: Option<f64>,
    /// Restrict convex checks to these iterates (default: every recorded k >= 1).
    #[arg(long = "checkpoint", value_name = "K")]
    checkpoints: Vec<u64>,
}

#[derive(Args)]
struct SummarizeArgs {
    #[arg(long)]
    dir: PathBuf,
}

// clap needs FromStr error types that implement Display; wrap the harness
// enums so the core error types stay crate-internal.
macro_rules! arg_enum_wrapper {
    ($wrapper:ident, $inner:ty) => {
        #[derive(Clone, Copy, Debug)]
        struct $wrapper($inner);

        impl FromStr for $wrapper {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                s.parse::<$inner>().map($wrapper).map_err(|e| e.to_string())
            }
        }
    };
}

arg_enum_wrapper!(SolverKindArg, SolverKind);
arg_enum_wrapper!(ReturnPolicyArg, ReturnPolicy);
arg_enum_wrapper!(BoundKindArg, BoundKind);

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Reference(args) => cmd_reference(args),
        Command::Check(args) => cmd_check(args),
        Command::Summarize(args) => cmd_summarize(args),
    }
}

fn out_dir(explicit: Option<PathBuf>) -> PathBuf {
    explicit.unwrap_or_else(|| {
        std::env::var_os("TUFW_OUT").map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs"))
    })
}

fn cmd_run(args: RunArgs) -> Result<ExitCode> {
    let config = ExperimentConfig {
        source: args.problem.source()?,
        loss: args.problem.loss,
        set: args.problem.set,
        lambda: args.problem.lambda,
        norm: args.problem.norm,
        solvers: args.solver.iter().map(|s| s.0).collect(),
        rules: args.rule,
        steps: args.steps,
        sampling: args.sampling,
        hmode: args.hmode,
        iters: args.iters,
        rule_horizon: args.rule_horizon,
        trials: args.trials.max(1),
        seed: args.seed,
        gap_every: args.gap_every,
        stop_at_gap: args.stop_at_gap,
        eps_targets: args.eps_targets,
        return_policy: args.return_policy.0,
    };
    let dir = out_dir(args.out);
    let outcome = run_experiment(&config, &dir, true)?;
    println!(
        "wrote {} trace file(s) and {} to {}",
        outcome.trace_paths.len(),
        outcome.summary_path.file_name().unwrap_or_default().to_string_lossy(),
        dir.display()
    );
    print!("{}", outcome.summary.to_table());
    if outcome.ok() {
        Ok(ExitCode::SUCCESS)
    } else {
        for cell in &outcome.failed {
            eprintln!(
                "failed cell: solver={} rule={:?} trial={}: {}",
                cell.solver, cell.rule, cell.trial, cell.error
            );
        }
        Ok(ExitCode::from(2))
    }
}

fn cmd_reference(args: ReferenceArgs) -> Result<ExitCode> {
    let source = args.problem.source()?;
    let (problem, remap) = load_problem(&source, args.problem.loss, args.problem.norm)?;
    if let Some(remap) = remap {
        eprintln!("note: labels remapped ({remap:?}) to match the {} loss", args.problem.loss);
    }
    let set = tufw_core::FeasibleSet::new(args.problem.set, args.problem.lambda)?;
    let reference = compute_reference(&problem, &set, args.iters)?;
    reference.save(&args.out)?;
    println!(
        "reference for {} ({} iterations): F* = {:.12e} -> {}",
        source.describe(),
        args.iters,
        reference.f_star,
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn load_check_traces(args: &CheckArgs) -> Result<Vec<TraceFile>> {
    let traces = if let Some(dir) = &args.dir {
        read_trace_dir(dir)?
    } else {
        args.traces.iter().map(|p| read_trace(p)).collect::<Result<Vec<_>, _>>()?
    };
    if traces.is_empty() {
        bail!("no trace files given (use --trace or --dir)");
    }
    let first = &traces[0].header;
    for t in &traces {
        if t.header.solver != first.solver
            || t.header.rule != first.rule
            || t.header.steps != first.steps
        {
            bail!("traces mix experiment cells; check one (solver, rule, steps) cell at a time");
        }
    }
    Ok(traces)
}

fn cmd_check(args: CheckArgs) -> Result<ExitCode> {
    let bound = args.bound.0;
    let traces = load_check_traces(&args)?;
    let header = traces[0].header.clone();
    let (problem, _) = load_problem(&header.config.source, header.config.loss, header.config.norm)?;
    let set = tufw_core::FeasibleSet::new(header.config.set, header.config.lambda)?;
    let constants = problem_constants(&problem, &set);
    let slack = args.slack.unwrap_or_else(|| bound.default_slack());
    let core_traces: Vec<tufw_core::solvers::Trace> = traces
        .iter()
        .map(|t| tufw_core::solvers::Trace { rows: t.rows.clone() })
        .collect();
    let trace_refs: Vec<&tufw_core::solvers::Trace> = core_traces.iter().collect();

    let report = if bound.is_convex() {
        let path = args
            .reference
            .as_ref()
            .context("convex bounds need --reference (run `tufw reference` first)")?;
        let reference = ReferenceSolution::load(path)?;
        let fingerprint = problem_fingerprint(&problem, &set);
        if reference.fingerprint != fingerprint {
            bail!(
                "reference fingerprint {} does not match this problem ({})",
                reference.fingerprint,
                fingerprint
            );
        }
        check_convex(bound, &trace_refs, &constants, reference.f_star, &args.checkpoints, slack)?
    } else {
        let f_ref = best_observed_objective(&trace_refs)
            .context("traces record no objectives")?;
        check_nonconvex(bound, &trace_refs, &constants, header.config.iters, f_ref, slack)?
    };

    println!("{}", report.summary());
    for row in report.rows.iter().filter(|r| !r.ok).take(20) {
        println!("  VIOLATION at k={}: lhs {:.6e} > rhs {:.6e}", row.k, row.lhs, row.rhs);
    }
    if report.passed() {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(3))
    }
}

fn cmd_summarize(args: SummarizeArgs) -> Result<ExitCode> {
    let traces = read_trace_dir(&args.dir)?;
    if traces.is_empty() {
        bail!("no .ndjson traces in {}", args.dir.display());
    }
    let summary = summarize(&traces);
    let path = args.dir.join("summary.json");
    std::fs::write(&path, serde_json::to_string_pretty(&summary)?)?;
    print!("{}", summary.to_table());
    println!("summary written to {}", path.display());
    Ok(ExitCode::SUCCESS)
}
