//! Batch-construction rules: which Taylor points get refreshed at iteration k.
//!
//! Stochastic rules draw a batch whose size has expectation beta_k; the
//! deterministic rules refresh everything at a decreasing frequency. Rule
//! evaluation starts at k = 1; the k = 0 full refresh is wired into solver
//! initialization. The RNG is a counter-based stream keyed by (seed, k), so
//! iterations are order-independent and trials reproducible.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::UnknownName;
use crate::math;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum RuleKind {
    /// Stochastic, batch size decreasing as n / sqrt(k).
    SbdSqrt,
    /// Deterministic: full refresh exactly when k is a perfect square.
    DbdSqrt,
    /// Stochastic, constant batch size n / K^(1/4); needs the horizon K.
    SbdFourth,
    /// Deterministic: full refresh when floor(K^(1/4)) divides k; needs K.
    DbdFourth,
    /// Never refresh after initialization.
    Empty,
    /// Refresh everything every iteration (recovers exact gradients).
    Full,
}

impl RuleKind {
    pub fn name(self) -> &'static str {
        match self {
            RuleKind::SbdSqrt => "sbd-sqrt",
            RuleKind::DbdSqrt => "dbd-sqrt",
            RuleKind::SbdFourth => "sbd-k4",
            RuleKind::DbdFourth => "dbd-k4",
            RuleKind::Empty => "empty",
            RuleKind::Full => "full",
        }
    }

    pub fn needs_horizon(self) -> bool {
        matches!(self, RuleKind::SbdFourth | RuleKind::DbdFourth)
    }

    pub fn is_stochastic(self) -> bool {
        matches!(self, RuleKind::SbdSqrt | RuleKind::SbdFourth)
    }
}

impl fmt::Display for RuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RuleKind {
    type Err = UnknownName;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sbd-sqrt" => Ok(RuleKind::SbdSqrt),
            "dbd-sqrt" => Ok(RuleKind::DbdSqrt),
            "sbd-k4" => Ok(RuleKind::SbdFourth),
            "dbd-k4" => Ok(RuleKind::DbdFourth),
            "empty" => Ok(RuleKind::Empty),
            "full" => Ok(RuleKind::Full),
            _ => Err(UnknownName {
                what: "batch rule",
                expected: "sbd-sqrt|dbd-sqrt|sbd-k4|dbd-k4|empty|full",
            }),
        }
    }
}

/// How stochastic rules realize a batch of the drawn size.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Sampling {
    /// Contiguous block (modulo n) from a uniformly drawn start index.
    CyclicBlock,
    /// Uniform subset without replacement.
    UniformNoReplacement,
}

impl Sampling {
    pub fn name(self) -> &'static str {
        match self {
            Sampling::CyclicBlock => "cyclic",
            Sampling::UniformNoReplacement => "uniform",
        }
    }
}

impl FromStr for Sampling {
    type Err = UnknownName;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cyclic" => Ok(Sampling::CyclicBlock),
            "uniform" => Ok(Sampling::UniformNoReplacement),
            _ => Err(UnknownName { what: "sampling mode", expected: "cyclic|uniform" }),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum RuleError {
    MissingHorizon(RuleKind),
    ZeroHorizon(RuleKind),
}

impl fmt::Display for RuleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RuleError::MissingHorizon(kind) => {
                write!(f, "rule {kind} needs the iteration horizon K")
            }
            RuleError::ZeroHorizon(kind) => write!(f, "rule {kind} needs K >= 1"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for RuleError {}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RuleSpec {
    kind: RuleKind,
    horizon: Option<u64>,
    sampling: Sampling,
    seed: u64,
}

impl RuleSpec {
    pub fn new(
        kind: RuleKind,
        horizon: Option<u64>,
        sampling: Sampling,
        seed: u64,
    ) -> Result<Self, RuleError> {
        if kind.needs_horizon() {
            match horizon {
                None => return Err(RuleError::MissingHorizon(kind)),
                Some(0) => return Err(RuleError::ZeroHorizon(kind)),
                Some(_) => {}
            }
        }
        Ok(RuleSpec { kind, horizon, sampling, seed })
    }

    pub fn kind(&self) -> RuleKind {
        self.kind
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn sampling(&self) -> Sampling {
        self.sampling
    }

    /// Replaces the seed (used to key independent trials).
    pub fn with_seed(&self, seed: u64) -> Self {
        RuleSpec { seed, ..self.clone() }
    }

    fn stream_rng(&self, k: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(k);
        rng
    }

    /// The batch B_k for k >= 1, as 0-based observation indices without
    /// duplicates. Deterministic rules never touch the RNG.
    pub fn batch_indices(&self, k: u64, n: usize) -> Vec<u32> {
        debug_assert!(k >= 1, "rules are evaluated from k = 1");
        match self.kind {
            RuleKind::Empty => Vec::new(),
            RuleKind::Full => (0..n as u32).collect(),
            RuleKind::DbdSqrt => {
                let r = math::isqrt(k);
                if r * r == k {
                    (0..n as u32).collect()
                } else {
                    Vec::new()
                }
            }
            RuleKind::DbdFourth => {
                let r = math::ifourth_root(self.horizon.expect("validated"));
                let r = r.max(1);
                if k % r == 0 {
                    (0..n as u32).collect()
                } else {
                    Vec::new()
                }
            }
            RuleKind::SbdSqrt | RuleKind::SbdFourth => {
                let beta = self.beta(k, n);
                let mut rng = self.stream_rng(k);
                let floor = beta as u64;
                let frac = beta - floor as f64;
                let xi = rng.gen_bool(frac.clamp(0.0, 1.0)) as u64;
                let size = ((floor + xi) as usize).min(n);
                self.draw(&mut rng, n, size)
            }
        }
    }

    fn beta(&self, k: u64, n: usize) -> f64 {
        match self.kind {
            RuleKind::SbdSqrt => n as f64 / math::sqrt(k as f64),
            RuleKind::SbdFourth => {
                let horizon = self.horizon.expect("validated") as f64;
                n as f64 / math::sqrt(math::sqrt(horizon))
            }
            _ => unreachable!("beta is only defined for stochastic rules"),
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng, n: usize, size: usize) -> Vec<u32> {
        match self.sampling {
            Sampling::CyclicBlock => {
                let start = rng.gen_range(0..n);
                (0..size).map(|j| ((start + j) % n) as u32).collect()
            }
            Sampling::UniformNoReplacement => {
                let mut idx: Vec<u32> =
                    rand::seq::index::sample(rng, n, size).iter().map(|i| i as u32).collect();
                idx.sort_unstable();
                idx
            }
        }
    }

    /// E|B_k| for stochastic rules; the exact |B_k| for deterministic ones.
    pub fn expected_batch_size(&self, k: u64, n: usize) -> f64 {
        debug_assert!(k >= 1);
        match self.kind {
            RuleKind::Empty => 0.0,
            RuleKind::Full => n as f64,
            RuleKind::DbdSqrt => {
                let r = math::isqrt(k);
                if r * r == k {
                    n as f64
                } else {
                    0.0
                }
            }
            RuleKind::DbdFourth => {
                let r = math::ifourth_root(self.horizon.expect("validated")).max(1);
                if k % r == 0 {
                    n as f64
                } else {
                    0.0
                }
            }
            RuleKind::SbdSqrt | RuleKind::SbdFourth => self.beta(k, n),
        }
    }
}
