//! Experiment configuration and problem loading.

use std::fmt;
use std::fs;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use tufw_core::dataset::{parse_libsvm, prepare_labels, synth_problem, LabelRemap};
use tufw_core::geometry::{Norm, SetKind};
use tufw_core::losses::LossFamily;
use tufw_core::rules::{RuleKind, Sampling};
use tufw_core::solvers::StepRule;
use tufw_core::taylor::HessianMode;
use tufw_core::{FeasibleSet, Problem};

use crate::HarnessError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    Tufw,
    Fw,
    FwAda,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Tufw => "tufw",
            SolverKind::Fw => "fw",
            SolverKind::FwAda => "fw-ada",
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tufw" => Ok(SolverKind::Tufw),
            "fw" => Ok(SolverKind::Fw),
            "fw-ada" => Ok(SolverKind::FwAda),
            _ => Err(HarnessError::UnknownName {
                what: "solver",
                expected: "tufw|fw|fw-ada",
            }),
        }
    }
}

/// Which iterate a run reports as "the" solution.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReturnPolicy {
    #[default]
    Last,
    BestGap,
    UniformRandom,
}

impl ReturnPolicy {
    pub fn name(self) -> &'static str {
        match self {
            ReturnPolicy::Last => "last",
            ReturnPolicy::BestGap => "best-gap",
            ReturnPolicy::UniformRandom => "uniform-random",
        }
    }
}

impl FromStr for ReturnPolicy {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "last" => Ok(ReturnPolicy::Last),
            "best-gap" => Ok(ReturnPolicy::BestGap),
            "uniform-random" => Ok(ReturnPolicy::UniformRandom),
            _ => Err(HarnessError::UnknownName {
                what: "return policy",
                expected: "last|best-gap|uniform-random",
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemSource {
    Data { path: PathBuf, dims: Option<usize> },
    Synth { n: usize, p: usize, seed: u64 },
}

impl ProblemSource {
    pub fn describe(&self) -> String {
        match self {
            ProblemSource::Data { path, .. } => path.display().to_string(),
            ProblemSource::Synth { n, p, seed } => format!("synth-{n}x{p}-seed{seed}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub source: ProblemSource,
    pub loss: LossFamily,
    pub set: SetKind,
    pub lambda: f64,
    pub norm: Norm,
    pub solvers: Vec<SolverKind>,
    pub rules: Vec<RuleKind>,
    pub steps: StepRule,
    pub sampling: Sampling,
    pub hmode: HessianMode,
    pub iters: u64,
    /// Horizon for the fourth-root rules; defaults to `iters`.
    pub rule_horizon: Option<u64>,
    pub trials: u64,
    pub seed: u64,
    /// Offline gap-evaluation stride; None picks the auto policy.
    pub gap_every: Option<u64>,
    /// Optional early exit once an evaluated gap reaches this value.
    pub stop_at_gap: Option<f64>,
    pub eps_targets: Vec<f64>,
    pub return_policy: ReturnPolicy,
}

impl ExperimentConfig {
    /// Gap stride actually used: the explicit one, or every iteration at desk
    /// scale and every 200 iterations once K >= 100 n.
    pub fn effective_gap_every(&self, n: usize) -> u64 {
        match self.gap_every {
            Some(m) => m.max(1),
            None if self.iters >= 100 * n as u64 => 200,
            None => 1,
        }
    }

    pub fn feasible_set(&self) -> Result<FeasibleSet, HarnessError> {
        FeasibleSet::new(self.set, self.lambda).map_err(HarnessError::from)
    }

    pub fn load_problem(&self) -> Result<(Problem, Option<LabelRemap>), HarnessError> {
        load_problem(&self.source, self.loss, self.norm)
    }

    /// Seed for one trial's RNG stream family.
    pub fn trial_seed(&self, trial: u64) -> u64 {
        self.seed.wrapping_add(trial.wrapping_mul(0x9E37_79B9_7F4A_7C15))
    }
}

pub fn load_problem(
    source: &ProblemSource,
    loss: LossFamily,
    norm: Norm,
) -> Result<(Problem, Option<LabelRemap>), HarnessError> {
    match source {
        ProblemSource::Synth { n, p, seed } => {
            Ok((synth_problem(*n, *p, loss, *seed), None))
        }
        ProblemSource::Data { path, dims } => {
            let text = fs::read_to_string(path)
                .map_err(|e| HarnessError::Io { path: path.clone(), source: e })?;
            let (w, mut y) = parse_libsvm(&text, *dims)?;
            let remap = prepare_labels(loss, &mut y)?;
            let problem = Problem::new(w, y, loss, norm)?;
            let note = (remap != LabelRemap::None).then_some(remap);
            Ok((problem, note))
        }
    }
}
