//! Projection-free constrained empirical-risk minimization with Taylor-point
//! updated gradient models.
//!
//! The crate provides the solver core: univariate loss families and their
//! smoothness constants ([`losses`]), feasible sets with linear minimization
//! oracles ([`geometry`]), sparse column-major problem storage and LIBSVM text
//! parsing ([`dataset`]), batch-construction rules ([`rules`]), the
//! incrementally maintained affine gradient model `g(x) = q + Hx` ([`taylor`]),
//! and the Frank-Wolfe style drivers with step-size schedules and trace
//! recording ([`solvers`]).
//!
//! The crate is `no_std`-compatible (allocation required). Without the default
//! `std` feature, enable the `libm` feature to supply the math intrinsics.

#![cfg_attr(not(feature = "std"), no_std)]

#[cfg(all(not(feature = "std"), not(feature = "libm")))]
compile_error!("tufw-core needs either the `std` feature or the `libm` feature");

extern crate alloc;

pub mod dataset;
pub mod geometry;
pub mod losses;
pub mod rules;
pub mod solvers;
pub mod sparse;
pub mod taylor;

mod math;

pub use dataset::Problem;
pub use geometry::{FeasibleSet, Norm, SetKind};
pub use losses::LossFamily;
pub use rules::{RuleKind, RuleSpec, Sampling};
pub use solvers::{IterationRecord, RunOptions, RunResult, StepRule, Trace};
pub use sparse::{SparseColumns, SparseVec};
pub use taylor::{HessianMode, TaylorModel};

/// Parse error for the CLI-facing enum names in this crate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UnknownName {
    pub what: &'static str,
    pub expected: &'static str,
}

impl core::fmt::Display for UnknownName {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "unknown {} (expected one of: {})", self.what, self.expected)
    }
}

#[cfg(feature = "std")]
impl std::error::Error for UnknownName {}
