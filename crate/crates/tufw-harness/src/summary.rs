//! Summary tables over trace files: per-target-epsilon first hits averaged
//! over trials, in the shape of the runtime-comparison tables. Summaries are
//! a pure function of the trace files, so they can be recomputed offline.

use serde::{Deserialize, Serialize};
use tufw_core::rules::RuleKind;
use tufw_core::solvers::StepRule;

use crate::config::SolverKind;
use crate::trace_io::TraceFile;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsSummary {
    pub eps: f64,
    /// Trials that reached the target.
    pub hits: u64,
    pub mean_first_hit_iter: Option<f64>,
    pub mean_first_hit_flops: Option<f64>,
    pub mean_first_hit_wall_ms: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub solver: SolverKind,
    pub rule: Option<RuleKind>,
    pub steps: StepRule,
    pub trials: u64,
    pub eps: Vec<EpsSummary>,
    pub mean_final_objective: f64,
    pub mean_final_gap: Option<f64>,
    pub mean_algorithm_flops: f64,
    pub mean_lmo_calls: f64,
    pub mean_wall_ms: f64,
    pub mean_returned_objective: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryReport {
    pub eps_targets: Vec<f64>,
    pub cells: Vec<CellSummary>,
}

fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Groups traces by (solver, steps, rule) and aggregates over trials. Cells
/// come out sorted by name so reruns produce identical reports.
pub fn summarize(traces: &[TraceFile]) -> SummaryReport {
    let eps_targets = traces
        .first()
        .map(|t| t.header.config.eps_targets.clone())
        .unwrap_or_default();

    let mut keys: Vec<(SolverKind, StepRule, Option<RuleKind>)> = traces
        .iter()
        .map(|t| (t.header.solver, t.header.steps, t.header.rule))
        .collect();
    keys.sort_by_key(|k| format!("{}_{}_{:?}", k.0, k.1, k.2));
    keys.dedup();

    let mut cells = Vec::new();
    for (solver, steps, rule) in keys {
        let group: Vec<&TraceFile> = traces
            .iter()
            .filter(|t| t.header.solver == solver && t.header.steps == steps && t.header.rule == rule)
            .collect();
        let mut eps = Vec::new();
        for &target in &eps_targets {
            let mut iters = Vec::new();
            let mut flops = Vec::new();
            let mut wall = Vec::new();
            for t in &group {
                if let Some(row) = t.rows.iter().find(|r| r.fw_gap.is_some_and(|g| g <= target)) {
                    iters.push(row.k as f64);
                    flops.push(row.flops as f64);
                    wall.push(row.wall_ms);
                }
            }
            eps.push(EpsSummary {
                eps: target,
                hits: iters.len() as u64,
                mean_first_hit_iter: mean(&iters),
                mean_first_hit_flops: mean(&flops),
                mean_first_hit_wall_ms: mean(&wall),
            });
        }
        let finals: Vec<&tufw_core::solvers::IterationRecord> =
            group.iter().filter_map(|t| t.rows.last()).collect();
        let final_gaps: Vec<f64> = finals.iter().filter_map(|r| r.fw_gap).collect();
        let returned: Vec<f64> =
            group.iter().filter_map(|t| t.header.returned_objective).collect();
        cells.push(CellSummary {
            solver,
            rule,
            steps,
            trials: group.len() as u64,
            eps,
            mean_final_objective: mean(&finals.iter().map(|r| r.objective).collect::<Vec<_>>())
                .unwrap_or(f64::NAN),
            mean_final_gap: mean(&final_gaps),
            mean_algorithm_flops: mean(&finals.iter().map(|r| r.flops as f64).collect::<Vec<_>>())
                .unwrap_or(0.0),
            mean_lmo_calls: mean(&finals.iter().map(|r| r.lmo_calls as f64).collect::<Vec<_>>())
                .unwrap_or(0.0),
            mean_wall_ms: mean(&finals.iter().map(|r| r.wall_ms).collect::<Vec<_>>())
                .unwrap_or(0.0),
            mean_returned_objective: mean(&returned),
        });
    }
    SummaryReport { eps_targets, cells }
}

impl SummaryReport {
    /// Plain-text table: one row per cell, one first-hit column per target.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<28} {:>7}",
            "cell (solver_steps_rule)", "trials"
        ));
        for eps in &self.eps_targets {
            out.push_str(&format!(" {:>16}", format!("iters@{eps:.0e}")));
            out.push_str(&format!(" {:>16}", format!("flops@{eps:.0e}")));
        }
        out.push_str(&format!(" {:>14} {:>12}\n", "final F", "final gap"));
        for cell in &self.cells {
            let name = format!(
                "{}_{}_{}",
                cell.solver,
                cell.steps,
                cell.rule.map_or("none", |r| r.name())
            );
            out.push_str(&format!("{:<28} {:>7}", name, cell.trials));
            for eps in &cell.eps {
                match (eps.mean_first_hit_iter, eps.mean_first_hit_flops) {
                    (Some(it), Some(fl)) => {
                        out.push_str(&format!(" {:>16.1}", it));
                        out.push_str(&format!(" {:>16.3e}", fl));
                    }
                    _ => {
                        out.push_str(&format!(" {:>16}", "-"));
                        out.push_str(&format!(" {:>16}", "-"));
                    }
                }
            }
            out.push_str(&format!(
                " {:>14.6e} {:>12}\n",
                cell.mean_final_objective,
                cell.mean_final_gap.map_or("-".to_string(), |g| format!("{g:.3e}"))
            ));
        }
        out
    }
}
