//! Convergence-bound checking: evaluates the guarantee matching a run
//! configuration against recorded traces and flags violations.
//!
//! Deterministic guarantees are checked per iterate with no slack. Guarantees
//! stated in expectation are checked against trial means (the benchmark
//! protocol runs 10 trials) with a documented slack multiplier (default 2x),
//! since finite-sample means fluctuate around the bounded expectation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use tufw_core::geometry::Norm;
use tufw_core::solvers::Trace;
use tufw_core::{FeasibleSet, Problem};

use crate::HarnessError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    /// Deterministic full-refresh-at-squares rule, harmonic steps, convex
    /// losses: optimality gap <= (2 L_eff D^2 + 144 Lhat_eff D^3) / (k+1).
    ConvexDeterministic,
    /// Stochastic decreasing-batch rule, harmonic steps, convex losses (in
    /// expectation): gap <= (2 L_eff D^2 + 134 Lhat_eff D^3) / (k+1).
    ConvexStochastic,
    /// Linear-prediction sharpening of the stochastic convex bound:
    /// gap <= (2 L D_2^2 + 134 Lhat D_1 D_inf^2) / (n (k+1)).
    ConvexLinearPrediction,
    /// Fixed-step nonconvex guarantee on the average Frank-Wolfe gap:
    /// avg gap <= eps_0 / sqrt(K+1) + (3 Lhat_eff D^3 + L_eff D^2) / (2 sqrt(K+1)).
    NonconvexAverageGap,
    /// Linear-prediction sharpening of the nonconvex average-gap bound.
    NonconvexLinearPrediction,
}

impl BoundKind {
    pub fn name(self) -> &'static str {
        match self {
            BoundKind::ConvexDeterministic => "convex-det",
            BoundKind::ConvexStochastic => "convex-stoch",
            BoundKind::ConvexLinearPrediction => "convex-lp",
            BoundKind::NonconvexAverageGap => "nonconvex",
            BoundKind::NonconvexLinearPrediction => "nonconvex-lp",
        }
    }

    pub fn is_convex(self) -> bool {
        !matches!(self, BoundKind::NonconvexAverageGap | BoundKind::NonconvexLinearPrediction)
    }

    /// Documented default slack: 1 for deterministic guarantees, 2 for
    /// expectation guarantees checked against finite trial means.
    pub fn default_slack(self) -> f64 {
        match self {
            BoundKind::ConvexDeterministic => 1.0,
            _ => 2.0,
        }
    }
}

impl fmt::Display for BoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BoundKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "convex-det" => Ok(BoundKind::ConvexDeterministic),
            "convex-stoch" => Ok(BoundKind::ConvexStochastic),
            "convex-lp" => Ok(BoundKind::ConvexLinearPrediction),
            "nonconvex" => Ok(BoundKind::NonconvexAverageGap),
            "nonconvex-lp" => Ok(BoundKind::NonconvexLinearPrediction),
            _ => Err(HarnessError::UnknownName {
                what: "bound",
                expected: "convex-det|convex-stoch|convex-lp|nonconvex|nonconvex-lp",
            }),
        }
    }
}

/// Everything the bound formulas need about an instance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemConstants {
    pub n: usize,
    pub l_eff: f64,
    pub lhat_eff: f64,
    pub l_uni: f64,
    pub lhat_uni: f64,
    /// Diameter of the feasible set in the primal norm.
    pub d: f64,
    /// Range diameters ||W'(x - y)||_q over the set, q in {1, 2, inf}.
    pub d1: f64,
    pub d2: f64,
    pub dinf: f64,
}

/// Computes the constants from the instance: diameters by exact vertex
/// enumeration, Lipschitz constants from the loss family and feature bound.
pub fn problem_constants(problem: &Problem, set: &FeasibleSet) -> ProblemConstants {
    let (l_uni, lhat_uni) = problem.univariate_constants();
    ProblemConstants {
        n: problem.n(),
        l_eff: problem.l_eff(),
        lhat_eff: problem.lhat_eff(),
        l_uni,
        lhat_uni,
        d: set.diameter(problem.p(), problem.primal_norm()),
        d1: set.range_diameter(problem.columns(), Norm::L1),
        d2: set.range_diameter(problem.columns(), Norm::L2),
        dinf: set.range_diameter(problem.columns(), Norm::Linf),
    }
}

/// RHS of a per-iterate convex guarantee at iterate k >= 1.
pub fn convex_rhs(kind: BoundKind, c: &ProblemConstants, k: u64) -> f64 {
    let k1 = (k + 1) as f64;
    match kind {
        BoundKind::ConvexDeterministic => {
            (2.0 * c.l_eff * c.d * c.d + 144.0 * c.lhat_eff * c.d.powi(3)) / k1
        }
        BoundKind::ConvexStochastic => {
            (2.0 * c.l_eff * c.d * c.d + 134.0 * c.lhat_eff * c.d.powi(3)) / k1
        }
        BoundKind::ConvexLinearPrediction => {
            (2.0 * c.l_uni * c.d2 * c.d2 + 134.0 * c.lhat_uni * c.d1 * c.dinf * c.dinf)
                / (c.n as f64 * k1)
        }
        _ => panic!("convex_rhs called with a nonconvex bound"),
    }
}

/// RHS of an average-gap guarantee for a fixed-step run over horizon K, with
/// eps0 = F(x^0) - F*.
pub fn nonconvex_rhs(kind: BoundKind, c: &ProblemConstants, horizon: u64, eps0: f64) -> f64 {
    let root = ((horizon + 1) as f64).sqrt();
    match kind {
        BoundKind::NonconvexAverageGap => {
            eps0 / root + (3.0 * c.lhat_eff * c.d.powi(3) + c.l_eff * c.d * c.d) / (2.0 * root)
        }
        BoundKind::NonconvexLinearPrediction => {
            eps0 / root
                + (3.0 * c.lhat_uni * c.d1 * c.dinf * c.dinf + c.l_uni * c.d2 * c.d2)
                    / (2.0 * c.n as f64 * root)
        }
        _ => panic!("nonconvex_rhs called with a convex bound"),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub k: u64,
    pub lhs: f64,
    pub rhs: f64,
    pub ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub kind: BoundKind,
    pub slack: f64,
    pub rows: Vec<BoundRow>,
    pub violations: usize,
}

impl BoundReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }

    pub fn summary(&self) -> String {
        format!(
            "bound {} with slack {}: {} checkpoints, {} violations",
            self.kind,
            self.slack,
            self.rows.len(),
            self.violations
        )
    }
}

fn report(kind: BoundKind, slack: f64, rows: Vec<BoundRow>) -> BoundReport {
    let violations = rows.iter().filter(|r| !r.ok).count();
    BoundReport { kind, slack, rows, violations }
}

/// Checks a per-iterate convex guarantee. The left side at iterate k is the
/// trial mean of F(x^k) - f_star across the given traces; `checkpoints`
/// restricts the k values tested (empty = every k >= 1 present in all traces).
pub fn check_convex(
    kind: BoundKind,
    traces: &[&Trace],
    constants: &ProblemConstants,
    f_star: f64,
    checkpoints: &[u64],
    slack: f64,
) -> Result<BoundReport, HarnessError> {
    if traces.is_empty() {
        return Err(HarnessError::Invalid("no traces to check".into()));
    }
    let common = traces.iter().map(|t| t.rows.len()).min().unwrap_or(0);
    for t in traces {
        for (a, b) in t.rows.iter().zip(&traces[0].rows) {
            if a.k != b.k {
                return Err(HarnessError::Invalid(
                    "traces record different iteration grids".into(),
                ));
            }
        }
    }
    let mut rows = Vec::new();
    for idx in 0..common {
        let k = traces[0].rows[idx].k;
        if k == 0 {
            continue;
        }
        if !checkpoints.is_empty() && !checkpoints.contains(&k) {
            continue;
        }
        let mean_obj =
            traces.iter().map(|t| t.rows[idx].objective).sum::<f64>() / traces.len() as f64;
        let lhs = mean_obj - f_star;
        let rhs = slack * convex_rhs(kind, constants, k);
        rows.push(BoundRow { k, lhs, rhs, ok: lhs <= rhs });
    }
    Ok(report(kind, slack, rows))
}

/// Checks an average-gap guarantee for fixed-step runs: the left side is the
/// trial mean of the per-trace average recorded gap; `f_star_ref` is the best
/// objective ever observed (F* itself being unknowable for nonconvex losses).
pub fn check_nonconvex(
    kind: BoundKind,
    traces: &[&Trace],
    constants: &ProblemConstants,
    horizon: u64,
    f_star_ref: f64,
    slack: f64,
) -> Result<BoundReport, HarnessError> {
    if traces.is_empty() {
        return Err(HarnessError::Invalid("no traces to check".into()));
    }
    let mut mean_avg_gap = 0.0;
    let mut mean_f0 = 0.0;
    for t in traces {
        let avg = t
            .mean_gap()
            .ok_or_else(|| HarnessError::Invalid("trace has no recorded gaps".into()))?;
        mean_avg_gap += avg;
        let first = t
            .rows
            .first()
            .ok_or_else(|| HarnessError::Invalid("trace is empty".into()))?;
        if first.k != 0 {
            return Err(HarnessError::Invalid("trace does not start at k = 0".into()));
        }
        mean_f0 += first.objective;
    }
    mean_avg_gap /= traces.len() as f64;
    mean_f0 /= traces.len() as f64;
    let eps0 = mean_f0 - f_star_ref;
    let rhs = slack * nonconvex_rhs(kind, constants, horizon, eps0);
    let rows = vec![BoundRow { k: horizon, lhs: mean_avg_gap, rhs, ok: mean_avg_gap <= rhs }];
    Ok(report(kind, slack, rows))
}

/// Smallest objective recorded anywhere in the traces.
pub fn best_observed_objective(traces: &[&Trace]) -> Option<f64> {
    traces
        .iter()
        .flat_map(|t| t.rows.iter().map(|r| r.objective))
        .min_by(|a, b| a.partial_cmp(b).expect("finite objectives"))
}
