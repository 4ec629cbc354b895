//! Problem construction: LIBSVM text parsing, synthetic instances, and the
//! derived smoothness constants.
//!
//! Features are stored column-major (one sparse vector per observation); see
//! [`crate::sparse`]. The feature bound `M = max_i ||w_i||_*` is taken in the
//! dual of the configured primal norm, and the problem-level constants are
//! `L_eff = L * M^2`, `Lhat_eff = L_hat * M^3`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::Norm;
use crate::losses::{InvalidLabel, LossFamily};
use crate::math;
use crate::sparse::{SparseColumns, SparseVec};

/// Flop charge for one l / l' / l'' evaluation in the cost model.
pub const LOSS_EVAL_FLOPS: u64 = 4;

#[derive(Clone, Debug, PartialEq)]
pub enum ParseError {
    EmptyInput,
    MalformedLabel { line: usize, token: String },
    MalformedFeature { line: usize, token: String },
    ZeroIndex { line: usize },
    NonIncreasingIndex { line: usize },
    DimsTooSmall { required: usize, given: usize },
    NoFeatures,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseError::EmptyInput => write!(f, "input has no data lines"),
            ParseError::MalformedLabel { line, token } => {
                write!(f, "line {line}: cannot parse label `{token}`")
            }
            ParseError::MalformedFeature { line, token } => {
                write!(f, "line {line}: cannot parse feature `{token}` (want idx:val)")
            }
            ParseError::ZeroIndex { line } => {
                write!(f, "line {line}: feature indices are 1-based; got 0")
            }
            ParseError::NonIncreasingIndex { line } => {
                write!(f, "line {line}: feature indices must be strictly increasing")
            }
            ParseError::DimsTooSmall { required, given } => {
                write!(f, "dimension override {given} is below the largest feature index {required}")
            }
            ParseError::NoFeatures => write!(f, "no feature index seen and no dimension override"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for ParseError {}

/// Parses LIBSVM text: `<label> <idx>:<val> ...` per line, 1-based strictly
/// increasing indices. `dims` may widen p beyond the largest index seen.
pub fn parse_libsvm(text: &str, dims: Option<usize>) -> Result<(SparseColumns, Vec<f64>), ParseError> {
    let mut cols: Vec<SparseVec> = Vec::new();
    let mut labels: Vec<f64> = Vec::new();
    let mut max_index = 0usize;

    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let mut tokens = line.split_whitespace();
        let Some(label_tok) = tokens.next() else { continue };
        let label: f64 = label_tok.parse().map_err(|_| ParseError::MalformedLabel {
            line: lineno,
            token: label_tok.into(),
        })?;

        let mut entries: Vec<(u32, f64)> = Vec::new();
        let mut prev_idx = 0u32;
        for tok in tokens {
            let (idx_s, val_s) = tok.split_once(':').ok_or_else(|| ParseError::MalformedFeature {
                line: lineno,
                token: tok.into(),
            })?;
            let idx: u32 = idx_s.parse().map_err(|_| ParseError::MalformedFeature {
                line: lineno,
                token: tok.into(),
            })?;
            let val: f64 = val_s.parse().map_err(|_| ParseError::MalformedFeature {
                line: lineno,
                token: tok.into(),
            })?;
            if idx == 0 {
                return Err(ParseError::ZeroIndex { line: lineno });
            }
            if idx <= prev_idx {
                return Err(ParseError::NonIncreasingIndex { line: lineno });
            }
            prev_idx = idx;
            max_index = max_index.max(idx as usize);
            entries.push((idx - 1, val));
        }
        labels.push(label);
        cols.push(SparseVec::new(&entries));
    }

    if labels.is_empty() {
        return Err(ParseError::EmptyInput);
    }
    let p = match dims {
        Some(d) if d < max_index => {
            return Err(ParseError::DimsTooSmall { required: max_index, given: d })
        }
        Some(d) => d,
        None if max_index == 0 => return Err(ParseError::NoFeatures),
        None => max_index,
    };
    Ok((SparseColumns::new(p, cols), labels))
}

/// Writes the LIBSVM text form back out (1-based indices, shortest float repr).
pub fn write_libsvm(w: &SparseColumns, y: &[f64]) -> String {
    let mut out = String::new();
    for (col, label) in w.columns().iter().zip(y) {
        out.push_str(&format!("{label}"));
        for (j, v) in col.iter() {
            out.push_str(&format!(" {}:{}", j + 1, v));
        }
        out.push('\n');
    }
    out
}

/// What [`prepare_labels`] did to the raw labels.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LabelRemap {
    None,
    /// {0,1} inputs remapped to {-1,+1} for the logistic family.
    ZeroOneToPlusMinus,
    /// {-1,+1} inputs remapped to {0,1} for the sigmoid-squared family.
    PlusMinusToZeroOne,
}

/// Remaps the common alternate binary-label convention in place, then checks
/// every label. LIBSVM files use {0,1} and {-1,+1} inconsistently, so the
/// remap is automatic; callers may surface the returned note as a warning.
pub fn prepare_labels(family: LossFamily, y: &mut [f64]) -> Result<LabelRemap, InvalidLabel> {
    let remap = match family {
        LossFamily::Logistic if y.iter().all(|&v| v == 0.0 || v == 1.0) && y.contains(&0.0) => {
            for v in y.iter_mut() {
                *v = if *v == 0.0 { -1.0 } else { 1.0 };
            }
            LabelRemap::ZeroOneToPlusMinus
        }
        LossFamily::SigmoidSquared
            if y.iter().all(|&v| v == -1.0 || v == 1.0) && y.contains(&-1.0) =>
        {
            for v in y.iter_mut() {
                *v = if *v == -1.0 { 0.0 } else { 1.0 };
            }
            LabelRemap::PlusMinusToZeroOne
        }
        _ => LabelRemap::None,
    };
    for &v in y.iter() {
        family.check_label(v)?;
    }
    Ok(remap)
}

#[derive(Clone, Debug, PartialEq)]
pub enum DatasetError {
    Empty,
    ZeroDimension,
    NonFiniteFeature { observation: usize },
    LengthMismatch { columns: usize, labels: usize },
    Label(InvalidLabel),
}

impl fmt::Display for DatasetError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DatasetError::Empty => write!(f, "problem needs at least one observation"),
            DatasetError::ZeroDimension => write!(f, "problem needs dimension p >= 1"),
            DatasetError::NonFiniteFeature { observation } => {
                write!(f, "observation {observation} has a non-finite feature")
            }
            DatasetError::LengthMismatch { columns, labels } => {
                write!(f, "{columns} feature columns but {labels} labels")
            }
            DatasetError::Label(e) => e.fmt(f),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for DatasetError {}

impl From<InvalidLabel> for DatasetError {
    fn from(e: InvalidLabel) -> Self {
        DatasetError::Label(e)
    }
}

/// An immutable ERM instance: features, labels, loss family, and the derived
/// constants under the configured primal norm.
#[derive(Clone, Debug, PartialEq)]
pub struct Problem {
    w: SparseColumns,
    y: Vec<f64>,
    family: LossFamily,
    norm: Norm,
    m: f64,
    l_eff: f64,
    lhat_eff: f64,
}

impl Problem {
    pub fn new(
        w: SparseColumns,
        y: Vec<f64>,
        family: LossFamily,
        norm: Norm,
    ) -> Result<Self, DatasetError> {
        if w.n_cols() == 0 {
            return Err(DatasetError::Empty);
        }
        if w.dim() == 0 {
            return Err(DatasetError::ZeroDimension);
        }
        if w.n_cols() != y.len() {
            return Err(DatasetError::LengthMismatch { columns: w.n_cols(), labels: y.len() });
        }
        for (i, col) in w.columns().iter().enumerate() {
            if col.iter().any(|(_, v)| !v.is_finite()) {
                return Err(DatasetError::NonFiniteFeature { observation: i });
            }
        }
        for &label in &y {
            family.check_label(label)?;
        }
        let m = feature_bound(&w, norm);
        let (l, l_hat) = family.lipschitz_constants();
        Ok(Problem {
            l_eff: l * m * m,
            lhat_eff: l_hat * m * m * m,
            m,
            w,
            y,
            family,
            norm,
        })
    }

    pub fn n(&self) -> usize {
        self.w.n_cols()
    }

    pub fn p(&self) -> usize {
        self.w.dim()
    }

    pub fn family(&self) -> LossFamily {
        self.family
    }

    pub fn primal_norm(&self) -> Norm {
        self.norm
    }

    pub fn columns(&self) -> &SparseColumns {
        &self.w
    }

    pub fn column(&self, i: usize) -> &SparseVec {
        self.w.column(i)
    }

    pub fn label(&self, i: usize) -> f64 {
        self.y[i]
    }

    pub fn labels(&self) -> &[f64] {
        &self.y
    }

    /// M = max_i ||w_i||_* under the dual of the primal norm.
    pub fn feature_bound(&self) -> f64 {
        self.m
    }

    /// L * M^2: Lipschitz constant of each gradient of f_i.
    pub fn l_eff(&self) -> f64 {
        self.l_eff
    }

    /// L_hat * M^3: Lipschitz constant of each Hessian of f_i.
    pub fn lhat_eff(&self) -> f64 {
        self.lhat_eff
    }

    /// The unscaled univariate constants (L, L_hat).
    pub fn univariate_constants(&self) -> (f64, f64) {
        self.family.lipschitz_constants()
    }

    pub fn nnz(&self) -> u64 {
        self.w.nnz() as u64
    }

    /// F(x) = (1/n) sum_i l(y_i, w_i' x).
    pub fn objective(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (col, &y) in self.w.columns().iter().zip(&self.y) {
            acc += self.family.value(y, col.dot(x));
        }
        acc / self.n() as f64
    }

    /// grad F(x) = (1/n) sum_i l'(y_i, w_i' x) w_i.
    pub fn exact_gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = alloc::vec![0.0; self.p()];
        self.exact_gradient_into(x, &mut g);
        g
    }

    pub fn exact_gradient_into(&self, x: &[f64], g: &mut [f64]) {
        let inv_n = 1.0 / self.n() as f64;
        g.fill(0.0);
        for (col, &y) in self.w.columns().iter().zip(&self.y) {
            let c = self.family.d1(y, col.dot(x)) * inv_n;
            col.axpy_into(c, g);
        }
    }

    /// Flop charge of one exact gradient evaluation.
    pub fn grad_flops(&self) -> u64 {
        4 * self.nnz() + (LOSS_EVAL_FLOPS + 1) * self.n() as u64
    }

    /// Flop charge of one objective evaluation.
    pub fn objective_flops(&self) -> u64 {
        2 * self.nnz() + (LOSS_EVAL_FLOPS + 1) * self.n() as u64 + 1
    }
}

/// M = max_i ||w_i||_* where ||.||_* is the dual of `primal`.
pub fn feature_bound(w: &SparseColumns, primal: Norm) -> f64 {
    w.columns()
        .iter()
        .map(|c| match primal {
            Norm::L1 => c.inf_norm(),
            Norm::L2 => c.l2_norm(),
            Norm::Linf => c.iter().map(|(_, v)| math::abs(v)).sum(),
        })
        .fold(0.0, f64::max)
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    math::sqrt(-2.0 * math::ln(u1)) * math::cos(2.0 * core::f64::consts::PI * u2)
}

fn stable_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + math::exp(-z))
    } else {
        let e = math::exp(z);
        e / (1.0 + e)
    }
}

/// Deterministic synthetic instance: standard-normal feature columns scaled to
/// ||w_i||_2 <= 1, labels drawn from a planted coefficient vector. Identical
/// seeds give bitwise-identical problems.
pub fn synth_problem(n: usize, p: usize, family: LossFamily, seed: u64) -> Problem {
    assert!(n >= 1 && p >= 1, "synth_problem needs n >= 1 and p >= 1");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut cols = Vec::with_capacity(n);
    for _ in 0..n {
        let entries: Vec<(u32, f64)> =
            (0..p).map(|j| (j as u32, standard_normal(&mut rng))).collect();
        let mut col = SparseVec::new(&entries);
        let norm = col.l2_norm();
        if norm > 1.0 {
            col.scale(1.0 / norm);
        }
        cols.push(col);
    }
    let w = SparseColumns::new(p, cols);

    let mut planted: Vec<f64> = (0..p).map(|_| standard_normal(&mut rng)).collect();
    let norm = Norm::L2.of(&planted);
    if norm > 0.0 {
        for v in &mut planted {
            *v *= 3.0 / norm;
        }
    } else {
        planted[0] = 3.0;
    }

    let y: Vec<f64> = w
        .columns()
        .iter()
        .map(|col| {
            let margin = col.dot(&planted);
            match family {
                LossFamily::Quadratic => margin + 0.1 * standard_normal(&mut rng),
                LossFamily::Logistic => {
                    if rng.gen::<f64>() < stable_sigmoid(3.0 * margin) {
                        1.0
                    } else {
                        -1.0
                    }
                }
                LossFamily::SigmoidSquared => {
                    if rng.gen::<f64>() < stable_sigmoid(3.0 * margin) {
                        1.0
                    } else {
                        0.0
                    }
                }
            }
        })
        .collect();

    Problem::new(w, y, family, Norm::L1).expect("synthetic problem is valid by construction")
}
