//! Frank-Wolfe style drivers: the Taylor-updating solver, the exact-gradient
//! baselines, step-size schedules, and per-iteration trace recording.
//!
//! All drivers run iterations k = 0..=K and keep every iterate feasible by
//! stepping along x + gamma (s - x) with gamma in [0, 1]. Objective values and
//! offline gap evaluations are charged to a separate metrics counter so the
//! recorded algorithm cost matches what the method itself performs.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::dataset::Problem;
use crate::geometry::{FeasibleSet, GeometryError, Vertex};
use crate::UnknownName;
use crate::math;
use crate::rules::{RuleError, RuleSpec};
use crate::taylor::{HessianMode, ModelError, TaylorModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Schedule {
    /// gamma_k = 2 / (k + 2).
    Harmonic,
    /// gamma_k = 1 / sqrt(K + 1); needs the horizon K.
    FixedInvSqrtK,
}

/// Step-size rule; the adaptive variant caps the base schedule by the exact
/// minimizer of the local quadratic model along the Frank-Wolfe direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum StepRule {
    Harmonic,
    FixedInvSqrtK,
    Adaptive { base: Schedule },
}

impl StepRule {
    pub fn name(self) -> &'static str {
        match self {
            StepRule::Harmonic => "harmonic",
            StepRule::FixedInvSqrtK => "fixed",
            StepRule::Adaptive { base: Schedule::Harmonic } => "adaptive",
            StepRule::Adaptive { base: Schedule::FixedInvSqrtK } => "adaptive-fixed",
        }
    }

    pub fn is_adaptive(self) -> bool {
        matches!(self, StepRule::Adaptive { .. })
    }

    fn base(self) -> Schedule {
        match self {
            StepRule::Harmonic => Schedule::Harmonic,
            StepRule::FixedInvSqrtK => Schedule::FixedInvSqrtK,
            StepRule::Adaptive { base } => base,
        }
    }
}

impl fmt::Display for StepRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StepRule {
    type Err = UnknownName;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "harmonic" => Ok(StepRule::Harmonic),
            "fixed" => Ok(StepRule::FixedInvSqrtK),
            "adaptive" => Ok(StepRule::Adaptive { base: Schedule::Harmonic }),
            "adaptive-fixed" => Ok(StepRule::Adaptive { base: Schedule::FixedInvSqrtK }),
            _ => Err(UnknownName {
                what: "step rule",
                expected: "harmonic|fixed|adaptive|adaptive-fixed",
            }),
        }
    }
}

fn schedule_gamma(schedule: Schedule, k: u64, horizon: Option<u64>) -> Result<f64, SolverError> {
    match schedule {
        Schedule::Harmonic => Ok(2.0 / (k as f64 + 2.0)),
        Schedule::FixedInvSqrtK => {
            let horizon = horizon.ok_or(SolverError::MissingHorizon)?;
            Ok(1.0 / math::sqrt(horizon as f64 + 1.0))
        }
    }
}

/// The step size for iteration k. For the adaptive rule, `gap_model` must be
/// g' (x - s) and `curvature` must be (s - x)' H (s - x); the schedule value
/// is capped by their ratio when the curvature is positive, and the result is
/// clamped to [0, 1].
pub fn step_size(
    rule: StepRule,
    k: u64,
    horizon: Option<u64>,
    gap_model: f64,
    curvature: f64,
) -> Result<f64, SolverError> {
    let gamma = schedule_gamma(rule.base(), k, horizon)?;
    if rule.is_adaptive() && curvature > 0.0 {
        Ok(f64::min(gamma, gap_model / curvature).clamp(0.0, 1.0))
    } else {
        Ok(gamma.clamp(0.0, 1.0))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SolverError {
    Geometry(GeometryError),
    Model(ModelError),
    Rule(RuleError),
    MissingHorizon,
    AdaptiveNeedsModel,
    InfeasibleStart,
    NonFinite { k: u64 },
}

impl fmt::Display for SolverError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolverError::Geometry(e) => e.fmt(f),
            SolverError::Model(e) => e.fmt(f),
            SolverError::Rule(e) => e.fmt(f),
            SolverError::MissingHorizon => {
                write!(f, "the fixed 1/sqrt(K+1) step rule needs the horizon K")
            }
            SolverError::AdaptiveNeedsModel => {
                write!(f, "adaptive steps need the Taylor model; use the fw-ada solver instead")
            }
            SolverError::InfeasibleStart => write!(f, "x0 is not in the feasible set"),
            SolverError::NonFinite { k } => {
                write!(f, "objective became non-finite at iteration {k}")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for SolverError {}

impl From<GeometryError> for SolverError {
    fn from(e: GeometryError) -> Self {
        SolverError::Geometry(e)
    }
}

impl From<ModelError> for SolverError {
    fn from(e: ModelError) -> Self {
        SolverError::Model(e)
    }
}

impl From<RuleError> for SolverError {
    fn from(e: RuleError) -> Self {
        SolverError::Rule(e)
    }
}

/// Wall-clock source; the core never reads time itself so that runs stay
/// reproducible unless the caller opts in.
pub trait Clock {
    fn elapsed_ms(&self) -> f64;
}

/// One trace row. Serialized field names are part of the trace file schema.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IterationRecord {
    pub k: u64,
    /// Objective F(x^k).
    #[cfg_attr(feature = "serde", serde(rename = "F"))]
    pub objective: f64,
    /// Offline Frank-Wolfe gap at x^k, when evaluated.
    #[cfg_attr(feature = "serde", serde(rename = "gap"))]
    pub fw_gap: Option<f64>,
    /// Step size used to leave x^k.
    pub gamma: f64,
    /// |B_k| (for the exact-gradient baselines: n).
    pub batch: u64,
    /// Cumulative algorithm flops (model updates + estimates + driver work).
    pub flops: u64,
    /// Cumulative LMO calls made by the algorithm itself.
    pub lmo_calls: u64,
    pub wall_ms: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trace {
    pub rows: Vec<IterationRecord>,
}

impl Trace {
    /// First recorded row with an evaluated gap at or below `eps`.
    pub fn first_hit_gap(&self, eps: f64) -> Option<&IterationRecord> {
        self.rows.iter().find(|r| r.fw_gap.map_or(false, |g| g <= eps))
    }

    /// Mean of the evaluated gaps (the average-gap metric of fixed-step runs).
    pub fn mean_gap(&self) -> Option<f64> {
        let gaps: Vec<f64> = self.rows.iter().filter_map(|r| r.fw_gap).collect();
        if gaps.is_empty() {
            None
        } else {
            Some(gaps.iter().sum::<f64>() / gaps.len() as f64)
        }
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.rows.last()
    }
}

/// Cost counters, kept separate so reports never commingle algorithm work,
/// LMO calls, and offline metrics.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Counters {
    pub taylor_update_flops: u64,
    pub gradient_flops: u64,
    pub solver_flops: u64,
    pub metrics_flops: u64,
    pub lmo_calls: u64,
}

impl Counters {
    pub fn algorithm_flops(&self) -> u64 {
        self.taylor_update_flops + self.gradient_flops + self.solver_flops
    }
}

#[derive(Clone, Copy, Default)]
pub struct RunOptions<'a> {
    /// Evaluate the offline Frank-Wolfe gap at iterations with k % m == 0.
    pub gap_every: Option<u64>,
    /// Keep one trace row every this many iterations (0 or 1 = every one).
    pub record_every: u64,
    /// Stop once an evaluated gap falls at or below this value.
    pub early_stop_gap: Option<f64>,
    /// Capture x^k at this iteration (for randomized return policies).
    pub capture_at: Option<u64>,
    pub clock: Option<&'a dyn Clock>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub trace: Trace,
    /// The final iterate x^{K+1}.
    pub x_final: Vec<f64>,
    /// Smallest objective seen and where it occurred.
    pub best_objective: f64,
    pub best_objective_k: u64,
    pub best_objective_x: Vec<f64>,
    /// Smallest evaluated gap, if any gap was evaluated.
    pub best_gap: Option<(u64, f64)>,
    pub best_gap_x: Option<Vec<f64>>,
    /// Iterate captured at `RunOptions::capture_at`.
    pub x_captured: Option<Vec<f64>>,
    pub counters: Counters,
}

/// View passed to the per-iteration observer of [`tufw_run`]; everything
/// refers to iteration k after the batch refresh, before the step is taken.
pub struct TufwIter<'a> {
    pub k: u64,
    pub x: &'a [f64],
    pub g: &'a [f64],
    pub vertex: Vertex,
    pub gamma: f64,
    pub batch_size: usize,
    pub model: &'a TaylorModel,
    pub record: &'a IterationRecord,
}

/// The Frank-Wolfe gap G(x) = max_{s in C} <x - s, grad F(x)>, evaluated with
/// the exact gradient. Callers running it offline charge
/// [`gap_eval_flops`] to their metrics counter.
pub fn fw_gap(problem: &Problem, set: &FeasibleSet, x: &[f64]) -> Result<f64, SolverError> {
    let g = problem.exact_gradient(x);
    let v = set.lmo_vertex(&g)?;
    Ok(dot(&g, x) - v.value * g[v.index])
}

/// Flop charge of one offline gap evaluation.
pub fn gap_eval_flops(problem: &Problem) -> u64 {
    problem.grad_flops() + 2 * problem.p() as u64 + 2
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn start_point(
    problem: &Problem,
    set: &FeasibleSet,
    x0: Option<&[f64]>,
) -> Result<Vec<f64>, SolverError> {
    match x0 {
        Some(x) => {
            if x.len() != problem.p() || !set.contains(x, 1e-9) {
                Err(SolverError::InfeasibleStart)
            } else {
                Ok(x.to_vec())
            }
        }
        None => Ok(set.default_vertex(problem.p())),
    }
}

/// Book-keeping shared by the drivers: trace rows, best-so-far tracking,
/// capture, and the early-stop decision.
struct Recorder<'a> {
    trace: Trace,
    best_objective: f64,
    best_objective_k: u64,
    best_objective_x: Vec<f64>,
    best_gap: Option<(u64, f64)>,
    best_gap_x: Option<Vec<f64>>,
    x_captured: Option<Vec<f64>>,
    opts: &'a RunOptions<'a>,
}

impl<'a> Recorder<'a> {
    fn new(opts: &'a RunOptions<'a>) -> Self {
        Recorder {
            trace: Trace::default(),
            best_objective: f64::INFINITY,
            best_objective_k: 0,
            best_objective_x: Vec::new(),
            best_gap: None,
            best_gap_x: None,
            x_captured: None,
            opts,
        }
    }

    fn gap_due(&self, k: u64) -> bool {
        self.opts.gap_every.map_or(false, |m| m <= 1 || k % m == 0)
    }

    fn observe(&mut self, k: u64, x: &[f64], objective: f64, gap: Option<f64>) {
        if objective < self.best_objective {
            self.best_objective = objective;
            self.best_objective_k = k;
            self.best_objective_x = x.to_vec();
        }
        if let Some(g) = gap {
            if self.best_gap.map_or(true, |(_, b)| g < b) {
                self.best_gap = Some((k, g));
                self.best_gap_x = Some(x.to_vec());
            }
        }
        if self.opts.capture_at == Some(k) {
            self.x_captured = Some(x.to_vec());
        }
    }

    fn should_record(&self, k: u64, last: u64) -> bool {
        self.opts.record_every <= 1 || k % self.opts.record_every == 0 || k == last
    }

    fn should_stop(&self, gap: Option<f64>) -> bool {
        match (self.opts.early_stop_gap, gap) {
            (Some(eps), Some(g)) => g <= eps,
            _ => false,
        }
    }

    fn wall_ms(&self) -> f64 {
        self.opts.clock.map_or(0.0, |c| c.elapsed_ms())
    }

    fn finish(self, x_final: Vec<f64>, counters: Counters) -> RunResult {
        RunResult {
            trace: self.trace,
            x_final,
            best_objective: self.best_objective,
            best_objective_k: self.best_objective_k,
            best_objective_x: self.best_objective_x,
            best_gap: self.best_gap,
            best_gap_x: self.best_gap_x,
            x_captured: self.x_captured,
            counters,
        }
    }
}

/// Runs the Taylor-updating solver: initialize every Taylor point at x0, then
/// per iteration refresh the rule's batch, estimate the gradient from the
/// affine model, call the LMO, and step. The observer fires once per
/// iteration after the record is assembled.
#[allow(clippy::too_many_arguments)]
pub fn tufw_run(
    problem: &Problem,
    set: &FeasibleSet,
    rule: &RuleSpec,
    steps: StepRule,
    iters: u64,
    x0: Option<&[f64]>,
    hmode: HessianMode,
    opts: &RunOptions,
    mut observer: impl FnMut(&TufwIter<'_>),
) -> Result<RunResult, SolverError> {
    let (n, p) = (problem.n(), problem.p());
    let mut x = start_point(problem, set, x0)?;
    let mut model = TaylorModel::init(problem, &x, 0, hmode)?;
    let mut g = alloc::vec![0.0; p];
    let mut recorder = Recorder::new(opts);
    let mut solver_flops = 0u64;
    let mut metrics_flops = 0u64;
    let mut lmo_calls = 0u64;

    let mut prev_step: Option<(f64, Vertex)> = None;
    for k in 0..=iters {
        let (batch_size, model_changed) = if k > 0 {
            let batch = rule.batch_indices(k, n);
            let touched = model.update_batch(problem, &batch, &x, k)?;
            (batch.len(), touched)
        } else {
            (n, true)
        };

        // While q and H are unchanged the estimate advances along the step in
        // O(p); any applied correction forces a fresh matrix-vector product.
        match prev_step {
            Some((gamma, vertex))
                if !model_changed && hmode == HessianMode::Dense && k > 0 =>
            {
                model.advance_estimate(&mut g, gamma, vertex);
            }
            _ => model.gradient_estimate_into(problem, &x, &mut g),
        }
        let vertex = set.lmo_vertex(&g)?;
        lmo_calls += 1;
        let gap_model = dot(&g, &x) - vertex.value * g[vertex.index];
        solver_flops += 2 * p as u64 + 2;

        let curvature = if steps.is_adaptive() {
            model.curvature_along(problem, &x, &g, vertex)
        } else {
            0.0
        };
        let gamma = step_size(steps, k, Some(iters), gap_model, curvature)?;

        let objective = problem.objective(&x);
        metrics_flops += problem.objective_flops();
        if !objective.is_finite() {
            return Err(SolverError::NonFinite { k });
        }
        let gap = if recorder.gap_due(k) {
            metrics_flops += gap_eval_flops(problem);
            Some(fw_gap(problem, set, &x)?)
        } else {
            None
        };
        recorder.observe(k, &x, objective, gap);

        let record = IterationRecord {
            k,
            objective,
            fw_gap: gap,
            gamma,
            batch: batch_size as u64,
            flops: model.flops().total() + solver_flops,
            lmo_calls,
            wall_ms: recorder.wall_ms(),
        };
        observer(&TufwIter {
            k,
            x: &x,
            g: &g,
            vertex,
            gamma,
            batch_size,
            model: &model,
            record: &record,
        });
        if recorder.should_record(k, iters) {
            recorder.trace.rows.push(record);
        }
        if recorder.should_stop(gap) {
            break;
        }

        for xv in x.iter_mut() {
            *xv *= 1.0 - gamma;
        }
        x[vertex.index] += gamma * vertex.value;
        solver_flops += 2 * p as u64 + 2;
        prev_step = Some((gamma, vertex));
    }

    let flops = model.flops();
    Ok(recorder.finish(
        x,
        Counters {
            taylor_update_flops: flops.update,
            gradient_flops: flops.estimate,
            solver_flops,
            metrics_flops,
            lmo_calls,
        },
    ))
}

/// The standard Frank-Wolfe baseline: exact gradient every iteration.
pub fn standard_fw_run(
    problem: &Problem,
    set: &FeasibleSet,
    steps: StepRule,
    iters: u64,
    x0: Option<&[f64]>,
    opts: &RunOptions,
) -> Result<RunResult, SolverError> {
    if steps.is_adaptive() {
        return Err(SolverError::AdaptiveNeedsModel);
    }
    exact_gradient_driver(problem, set, iters, x0, opts, |k, _gap, _norm_sq| {
        step_size(steps, k, Some(iters), 0.0, 0.0)
    })
}

/// Frank-Wolfe with the gap-ratio adaptive step
/// gamma_k = min(1, G(x^k) / (L_eff ||x^k - s^k||^2)), the norm being the
/// problem's primal norm. The gap comes from the already-computed exact
/// gradient at no extra LMO cost.
pub fn fw_ada_run(
    problem: &Problem,
    set: &FeasibleSet,
    iters: u64,
    x0: Option<&[f64]>,
    opts: &RunOptions,
) -> Result<RunResult, SolverError> {
    let l_eff = problem.l_eff();
    exact_gradient_driver(problem, set, iters, x0, opts, move |_k, gap, norm_sq| {
        if gap <= 0.0 || norm_sq <= 0.0 {
            Ok(0.0)
        } else {
            Ok(f64::min(1.0, gap / (l_eff * norm_sq)))
        }
    })
}

fn exact_gradient_driver(
    problem: &Problem,
    set: &FeasibleSet,
    iters: u64,
    x0: Option<&[f64]>,
    opts: &RunOptions,
    mut gamma_of: impl FnMut(u64, f64, f64) -> Result<f64, SolverError>,
) -> Result<RunResult, SolverError> {
    let (n, p) = (problem.n(), problem.p());
    let mut x = start_point(problem, set, x0)?;
    let mut g = alloc::vec![0.0; p];
    let mut recorder = Recorder::new(opts);
    let mut gradient_flops = 0u64;
    let mut solver_flops = 0u64;
    let mut metrics_flops = 0u64;
    let mut lmo_calls = 0u64;

    for k in 0..=iters {
        problem.exact_gradient_into(&x, &mut g);
        gradient_flops += problem.grad_flops();
        let vertex = set.lmo_vertex(&g)?;
        lmo_calls += 1;
        // the gradient is exact here, so this is the true Frank-Wolfe gap
        let gap_exact = dot(&g, &x) - vertex.value * g[vertex.index];
        solver_flops += 2 * p as u64 + 2;

        let norm_sq = {
            let primal = problem.primal_norm();
            let mut acc: f64 = 0.0;
            let mut linf: f64 = 0.0;
            for (j, &xv) in x.iter().enumerate() {
                let d = xv - if j == vertex.index { vertex.value } else { 0.0 };
                match primal {
                    crate::geometry::Norm::L1 => acc += math::abs(d),
                    crate::geometry::Norm::L2 => acc += d * d,
                    crate::geometry::Norm::Linf => linf = f64::max(linf, math::abs(d)),
                }
            }
            solver_flops += 2 * p as u64;
            match primal {
                crate::geometry::Norm::L1 => acc * acc,
                crate::geometry::Norm::L2 => acc,
                crate::geometry::Norm::Linf => linf * linf,
            }
        };
        let gamma = gamma_of(k, gap_exact, norm_sq)?.clamp(0.0, 1.0);

        let objective = problem.objective(&x);
        metrics_flops += problem.objective_flops();
        if !objective.is_finite() {
            return Err(SolverError::NonFinite { k });
        }
        let gap = if recorder.gap_due(k) {
            metrics_flops += 2 * p as u64 + 2;
            Some(gap_exact)
        } else {
            None
        };
        recorder.observe(k, &x, objective, gap);

        if recorder.should_record(k, iters) {
            recorder.trace.rows.push(IterationRecord {
                k,
                objective,
                fw_gap: gap,
                gamma,
                batch: n as u64,
                flops: gradient_flops + solver_flops,
                lmo_calls,
                wall_ms: recorder.wall_ms(),
            });
        }
        if recorder.should_stop(gap) {
            break;
        }

        for xv in x.iter_mut() {
            *xv *= 1.0 - gamma;
        }
        x[vertex.index] += gamma * vertex.value;
        solver_flops += 2 * p as u64 + 2;
    }

    Ok(recorder.finish(
        x,
        Counters {
            taylor_update_flops: 0,
            gradient_flops,
            solver_flops,
            metrics_flops,
            lmo_calls,
        },
    ))
}
