//! Cross-module properties of whole solver runs.

use tufw_core::dataset::synth_problem;
use tufw_core::geometry::Norm;
use tufw_core::losses::LossFamily;
use tufw_core::rules::{RuleKind, RuleSpec, Sampling};
use tufw_core::solvers::{fw_ada_run, standard_fw_run, tufw_run, RunOptions, RunResult, StepRule};
use tufw_core::{FeasibleSet, HessianMode};

fn rule(kind: RuleKind, horizon: Option<u64>, seed: u64) -> RuleSpec {
    RuleSpec::new(kind, horizon, Sampling::CyclicBlock, seed).unwrap()
}

fn run_tufw(kind: RuleKind, steps: StepRule, seed: u64, iters: u64) -> RunResult {
    let problem = synth_problem(24, 5, LossFamily::Logistic, 31);
    let set = FeasibleSet::l1_ball(1.0).unwrap();
    let opts = RunOptions { gap_every: Some(1), ..Default::default() };
    let horizon = kind.needs_horizon().then_some(iters);
    tufw_run(
        &problem,
        &set,
        &rule(kind, horizon, seed),
        steps,
        iters,
        None,
        HessianMode::Dense,
        &opts,
        |_| {},
    )
    .unwrap()
}

#[test]
fn iterates_stay_feasible() {
    let problem = synth_problem(24, 5, LossFamily::Logistic, 31);
    let set = FeasibleSet::l1_ball(1.0).unwrap();
    let opts = RunOptions::default();
    let mut max_l1: f64 = 0.0;
    tufw_run(
        &problem,
        &set,
        &rule(RuleKind::SbdSqrt, None, 9),
        StepRule::Harmonic,
        300,
        None,
        HessianMode::Dense,
        &opts,
        |it| max_l1 = max_l1.max(Norm::L1.of(it.x)),
    )
    .unwrap();
    assert!(max_l1 <= 1.0 * (1.0 + 1e-12), "left the ball: {max_l1}");
}

#[test]
fn recorded_gaps_are_nonnegative() {
    for kind in [RuleKind::SbdSqrt, RuleKind::DbdSqrt, RuleKind::Empty] {
        let result = run_tufw(kind, StepRule::Harmonic, 3, 200);
        for row in &result.trace.rows {
            let gap = row.fw_gap.unwrap();
            assert!(gap >= -1e-10, "negative gap {gap} at k={}", row.k);
        }
    }
}

#[test]
fn identical_config_gives_bitwise_identical_traces() {
    // no clock attached, so wall_ms is identically zero and rows compare exact
    let a = run_tufw(RuleKind::SbdSqrt, StepRule::Harmonic, 42, 250);
    let b = run_tufw(RuleKind::SbdSqrt, StepRule::Harmonic, 42, 250);
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.x_final, b.x_final);
    let c = run_tufw(RuleKind::SbdSqrt, StepRule::Harmonic, 43, 250);
    assert_ne!(a.trace, c.trace, "different seeds should differ");
}

#[test]
fn cumulative_counters_are_monotone() {
    let result = run_tufw(RuleKind::SbdSqrt, StepRule::Adaptive { base: tufw_core::solvers::Schedule::Harmonic }, 7, 150);
    for pair in result.trace.rows.windows(2) {
        assert!(pair[0].k < pair[1].k);
        assert!(pair[0].flops <= pair[1].flops);
        assert!(pair[0].lmo_calls <= pair[1].lmo_calls);
    }
}

#[test]
fn baselines_descend_on_convex_problems() {
    let problem = synth_problem(24, 5, LossFamily::Logistic, 31);
    let set = FeasibleSet::l1_ball(1.0).unwrap();
    let opts = RunOptions { gap_every: Some(1), ..Default::default() };
    let fw = standard_fw_run(&problem, &set, StepRule::Harmonic, 400, None, &opts).unwrap();
    let ada = fw_ada_run(&problem, &set, 400, None, &opts).unwrap();
    let f0 = fw.trace.rows[0].objective;
    assert!(fw.trace.last().unwrap().objective < f0);
    assert!(ada.trace.last().unwrap().objective < f0);
    // the adaptive baseline needs no more iterations than plain harmonic to
    // reach its final gap
    let target = ada.trace.last().unwrap().fw_gap.unwrap();
    assert!(fw.trace.last().unwrap().fw_gap.unwrap() >= -1e-12);
    assert!(target >= -1e-12);
}

#[test]
fn early_stop_truncates_trace() {
    let problem = synth_problem(24, 5, LossFamily::Logistic, 31);
    let set = FeasibleSet::l1_ball(1.0).unwrap();
    let opts = RunOptions {
        gap_every: Some(1),
        early_stop_gap: Some(0.05),
        ..Default::default()
    };
    let result = standard_fw_run(&problem, &set, StepRule::Harmonic, 100_000, None, &opts).unwrap();
    let last = result.trace.last().unwrap();
    assert!(last.fw_gap.unwrap() <= 0.05);
    assert!((last.k as usize) < 100_000, "should stop well before the horizon");
}

#[test]
fn capture_at_returns_the_requested_iterate() {
    let problem = synth_problem(24, 5, LossFamily::Logistic, 31);
    let set = FeasibleSet::l1_ball(1.0).unwrap();
    let opts = RunOptions { capture_at: Some(17), ..Default::default() };
    let mut seen = None;
    let result = tufw_run(
        &problem,
        &set,
        &rule(RuleKind::DbdSqrt, None, 0),
        StepRule::Harmonic,
        40,
        None,
        HessianMode::Dense,
        &opts,
        |it| {
            if it.k == 17 {
                seen = Some(it.x.to_vec());
            }
        },
    )
    .unwrap();
    assert_eq!(result.x_captured, seen);
}

#[test]
fn simplex_runs_stay_on_the_simplex() {
    use tufw_core::SetKind;
    let problem = synth_problem(20, 6, LossFamily::Quadratic, 55);
    let set = FeasibleSet::new(SetKind::Simplex, 2.0).unwrap();
    let opts = RunOptions { gap_every: Some(1), ..Default::default() };
    let result = tufw_run(
        &problem,
        &set,
        &rule(RuleKind::DbdSqrt, None, 0),
        StepRule::Harmonic,
        300,
        None,
        HessianMode::Dense,
        &opts,
        |it| {
            let sum: f64 = it.x.iter().sum();
            assert!((sum - 2.0).abs() <= 1e-10, "left the simplex at k={}", it.k);
            assert!(it.x.iter().all(|&v| v >= 0.0));
        },
    )
    .unwrap();
    let first = result.trace.rows.first().unwrap().objective;
    let last = result.trace.rows.last().unwrap();
    assert!(last.objective < first);
    assert!(last.fw_gap.unwrap() >= -1e-10);
}

#[test]
fn dense_and_factored_runs_agree_to_solver_tolerance() {
    // the dense mode advances its estimate incrementally between refreshes,
    // so the trajectories agree numerically rather than bitwise
    let problem = synth_problem(24, 5, LossFamily::Logistic, 31);
    let set = FeasibleSet::l1_ball(1.0).unwrap();
    let opts = RunOptions { gap_every: Some(25), ..Default::default() };
    let mut results = Vec::new();
    for hmode in [HessianMode::Dense, HessianMode::Factored] {
        results.push(
            tufw_run(
                &problem,
                &set,
                &rule(RuleKind::DbdSqrt, None, 0),
                StepRule::Harmonic,
                400,
                None,
                hmode,
                &opts,
                |_| {},
            )
            .unwrap(),
        );
    }
    for (a, b) in results[0].trace.rows.iter().zip(&results[1].trace.rows) {
        assert!((a.objective - b.objective).abs() <= 1e-9);
        if let (Some(ga), Some(gb)) = (a.fw_gap, b.fw_gap) {
            assert!((ga - gb).abs() <= 1e-9);
        }
    }
}

#[test]
fn nonconvex_average_gap_shrinks_with_horizon() {
    // quick desk check; the acceptance suite runs the full protocol
    let problem = synth_problem(16, 4, LossFamily::SigmoidSquared, 77);
    let set = FeasibleSet::l1_ball(1.0).unwrap();
    let opts = RunOptions { gap_every: Some(1), ..Default::default() };
    let mut means = Vec::new();
    for horizon in [32u64, 512] {
        let result = tufw_run(
            &problem,
            &set,
            &rule(RuleKind::SbdFourth, Some(horizon), 5),
            StepRule::FixedInvSqrtK,
            horizon,
            None,
            HessianMode::Dense,
            &opts,
            |_| {},
        )
        .unwrap();
        means.push(result.trace.mean_gap().unwrap());
    }
    assert!(means[1] < means[0], "average gap should shrink: {means:?}");
}
