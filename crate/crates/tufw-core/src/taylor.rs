//! The incrementally maintained affine gradient model g(x) = q + H x.
//!
//! Under linear prediction every per-observation gradient and Hessian depends
//! on the Taylor point b_i only through the scalar margin theta_i = w_i' b_i,
//! so the model stores one margin (plus cached derivative coefficients) per
//! observation instead of a p-vector. Refreshing observation i at the current
//! iterate is then a rank-one correction of H and an axpy on q:
//!
//!   q += [(l'(t') - l''(t') t') - (l'(t) - l''(t) t)] / n * w_i
//!   H += [l''(t') - l''(t)] / n * w_i w_i'
//!
//! with t the old and t' the new margin. The dense accumulator makes a
//! gradient estimate one O(p^2) matrix-vector product; the factored mode skips
//! H entirely and pays O(nnz) per estimate instead, which wins when p^2
//! dominates the total support size.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::dataset::{Problem, LOSS_EVAL_FLOPS};
use crate::geometry::Vertex;
use crate::UnknownName;
use crate::sparse::SparseVec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum HessianMode {
    /// Aggregate H into a dense p x p accumulator (O(p^2) estimates).
    Dense,
    /// Keep only per-observation coefficients; H x = W (c .* (W' x)).
    Factored,
}

impl HessianMode {
    pub fn name(self) -> &'static str {
        match self {
            HessianMode::Dense => "dense",
            HessianMode::Factored => "factored",
        }
    }
}

impl FromStr for HessianMode {
    type Err = UnknownName;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dense" => Ok(HessianMode::Dense),
            "factored" => Ok(HessianMode::Factored),
            _ => Err(UnknownName { what: "hessian mode", expected: "dense|factored" }),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ModelError {
    DimensionMismatch { expected: usize, got: usize },
    ObservationOutOfRange { index: u32, n: usize },
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelError::DimensionMismatch { expected, got } => {
                write!(f, "expected a length-{expected} vector, got {got}")
            }
            ModelError::ObservationOutOfRange { index, n } => {
                write!(f, "batch index {index} out of range for n = {n}")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for ModelError {}

/// Work counters, split so update cost and estimate cost stay separable.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ModelFlops {
    /// Initialization, batch refreshes, and drift rebuilds.
    pub update: u64,
    /// Gradient estimates and curvature queries.
    pub estimate: u64,
}

impl ModelFlops {
    pub fn total(&self) -> u64 {
        self.update + self.estimate
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaylorModel {
    mode: HessianMode,
    n: usize,
    p: usize,
    inv_n: f64,
    /// Taylor-point margins theta_i = w_i' b_i.
    theta: Vec<f64>,
    /// Cached intercepts l'(theta_i) - l''(theta_i) theta_i.
    intercept: Vec<f64>,
    /// Cached curvatures l''(theta_i).
    curv: Vec<f64>,
    /// Latest iteration at which observation i was refreshed.
    last_update: Vec<u64>,
    q: Vec<f64>,
    /// Dense row-major p x p accumulator (empty in factored mode).
    h: Vec<f64>,
    /// Scratch for pre-scaled column values during rank-one updates.
    scratch: Vec<f64>,
    /// Full-batch refreshes that actually changed the accumulators; every
    /// n-th one triggers an exact rebuild to cap floating-point drift.
    effective_full_refreshes: u64,
    flops: ModelFlops,
}

impl TaylorModel {
    /// Builds the model with every Taylor point at `x0` (iteration `k0`).
    pub fn init(
        problem: &Problem,
        x0: &[f64],
        k0: u64,
        mode: HessianMode,
    ) -> Result<Self, ModelError> {
        let (n, p) = (problem.n(), problem.p());
        if x0.len() != p {
            return Err(ModelError::DimensionMismatch { expected: p, got: x0.len() });
        }
        let mut model = TaylorModel {
            mode,
            n,
            p,
            inv_n: 1.0 / n as f64,
            theta: alloc::vec![0.0; n],
            intercept: alloc::vec![0.0; n],
            curv: alloc::vec![0.0; n],
            last_update: alloc::vec![k0; n],
            q: alloc::vec![0.0; p],
            h: match mode {
                HessianMode::Dense => alloc::vec![0.0; p * p],
                HessianMode::Factored => Vec::new(),
            },
            scratch: alloc::vec![0.0; problem.columns().max_col_nnz()],
            effective_full_refreshes: 0,
            flops: ModelFlops::default(),
        };
        let family = problem.family();
        for i in 0..n {
            let col = problem.column(i);
            let y = problem.label(i);
            let theta = col.dot(x0);
            model.theta[i] = theta;
            model.intercept[i] = family.taylor_intercept(y, theta);
            model.curv[i] = family.d2(y, theta);
            model.charge_update(col.nnz() as u64, 2 * LOSS_EVAL_FLOPS + 2);
            model.accumulate(i, col);
        }
        Ok(model)
    }

    fn charge_update(&mut self, nnz: u64, evals: u64) {
        // margin dot + derivative evaluations
        self.flops.update += 2 * nnz + evals;
    }

    /// Adds observation i's current contribution into q (and H when dense).
    fn accumulate(&mut self, i: usize, col: &SparseVec) {
        let a = self.intercept[i] * self.inv_n;
        col.axpy_into(a, &mut self.q);
        self.flops.update += 2 * col.nnz() as u64 + 1;
        if self.mode == HessianMode::Dense {
            let c = self.curv[i] * self.inv_n;
            self.flops.update += 1;
            self.rank_one(c, col);
        }
    }

    /// H += coef * w w', touching only the upper triangle arithmetically and
    /// mirroring by copy, so H stays exactly symmetric.
    fn rank_one(&mut self, coef: f64, col: &SparseVec) {
        let p = self.p;
        let idx = col.indices();
        let val = col.values();
        let m = idx.len();
        for (u, &v) in self.scratch[..m].iter_mut().zip(val) {
            *u = coef * v;
        }
        self.flops.update += m as u64 + (m as u64) * (m as u64 + 1);
        for a in 0..m {
            let ia = idx[a] as usize;
            let ua = self.scratch[a];
            for b in a..m {
                let ib = idx[b] as usize;
                let cell = &mut self.h[ia * p + ib];
                *cell += ua * val[b];
                if ib != ia {
                    self.h[ib * p + ia] = self.h[ia * p + ib];
                }
            }
        }
    }

    /// Refreshes the Taylor points in `batch` to the iterate `x` at iteration
    /// `k`, applying rank-one corrections. An empty batch is a bitwise no-op;
    /// so are corrections whose coefficients are exactly zero (the quadratic
    /// family always lands here). Returns whether q or H actually changed,
    /// which callers may use to keep a cached estimate valid.
    pub fn update_batch(
        &mut self,
        problem: &Problem,
        batch: &[u32],
        x: &[f64],
        k: u64,
    ) -> Result<bool, ModelError> {
        if x.len() != self.p {
            return Err(ModelError::DimensionMismatch { expected: self.p, got: x.len() });
        }
        let family = problem.family();
        let mut touched = false;
        for &raw in batch {
            let i = raw as usize;
            if i >= self.n {
                return Err(ModelError::ObservationOutOfRange { index: raw, n: self.n });
            }
            let col = problem.column(i);
            let y = problem.label(i);
            let theta = col.dot(x);
            let intercept = family.taylor_intercept(y, theta);
            let curv = family.d2(y, theta);
            self.charge_update(col.nnz() as u64, 2 * LOSS_EVAL_FLOPS + 2);

            let dq = (intercept - self.intercept[i]) * self.inv_n;
            self.flops.update += 2;
            if dq != 0.0 {
                col.axpy_into(dq, &mut self.q);
                self.flops.update += 2 * col.nnz() as u64;
                touched = true;
            }
            let dh = (curv - self.curv[i]) * self.inv_n;
            self.flops.update += 2;
            if self.mode == HessianMode::Dense && dh != 0.0 {
                self.rank_one(dh, col);
                touched = true;
            }

            self.theta[i] = theta;
            self.intercept[i] = intercept;
            self.curv[i] = curv;
            self.last_update[i] = k;
        }
        if batch.len() == self.n && touched {
            self.effective_full_refreshes += 1;
            if self.effective_full_refreshes % self.n as u64 == 0 {
                self.rebuild(problem);
            }
        }
        Ok(touched)
    }

    /// Re-sums q and H from the cached per-observation state, discarding the
    /// roundoff accumulated by long chains of rank-one corrections.
    fn rebuild(&mut self, problem: &Problem) {
        self.q.fill(0.0);
        self.h.fill(0.0);
        for i in 0..self.n {
            self.accumulate(i, problem.column(i));
        }
    }

    /// g = q + H x.
    pub fn gradient_estimate(&mut self, problem: &Problem, x: &[f64]) -> Vec<f64> {
        let mut g = alloc::vec![0.0; self.p];
        self.gradient_estimate_into(problem, x, &mut g);
        g
    }

    pub fn gradient_estimate_into(&mut self, problem: &Problem, x: &[f64], g: &mut [f64]) {
        debug_assert_eq!(x.len(), self.p);
        debug_assert_eq!(g.len(), self.p);
        match self.mode {
            HessianMode::Dense => {
                let p = self.p;
                for (r, out) in g.iter_mut().enumerate() {
                    let row = &self.h[r * p..(r + 1) * p];
                    let mut acc = self.q[r];
                    for (hv, xv) in row.iter().zip(x) {
                        acc += hv * xv;
                    }
                    *out = acc;
                }
                self.flops.estimate += 2 * (p as u64) * (p as u64) + p as u64;
            }
            HessianMode::Factored => {
                g.copy_from_slice(&self.q);
                for i in 0..self.n {
                    let col = problem.column(i);
                    let coef = self.curv[i] * self.inv_n * col.dot(x);
                    col.axpy_into(coef, g);
                    self.flops.estimate += 4 * col.nnz() as u64 + 2;
                }
            }
        }
    }

    /// d' H d; may be negative for non-convex families.
    pub fn curvature(&mut self, problem: &Problem, d: &[f64]) -> f64 {
        debug_assert_eq!(d.len(), self.p);
        match self.mode {
            HessianMode::Dense => {
                let p = self.p;
                let mut acc = 0.0;
                for r in 0..p {
                    let row = &self.h[r * p..(r + 1) * p];
                    let mut hd = 0.0;
                    for (hv, dv) in row.iter().zip(d) {
                        hd += hv * dv;
                    }
                    acc += d[r] * hd;
                }
                self.flops.estimate += 2 * (p as u64) * (p as u64) + 2 * p as u64;
                acc
            }
            HessianMode::Factored => {
                let mut acc = 0.0;
                for i in 0..self.n {
                    let col = problem.column(i);
                    let m = col.dot(d);
                    acc += self.curv[i] * m * m;
                    self.flops.estimate += 2 * col.nnz() as u64 + 3;
                }
                acc * self.inv_n
            }
        }
    }

    /// Advances a cached estimate g = q + H x to the next iterate
    /// x' = (1 - gamma) x + gamma s without touching H as a whole:
    /// q + H x' = (1 - gamma) g + gamma (q + s.value * H e_{s.index}), one
    /// column read instead of a matrix-vector product. Only valid while q and
    /// H are unchanged since g was computed; dense mode only.
    pub fn advance_estimate(&mut self, g: &mut [f64], gamma: f64, vertex: Vertex) {
        debug_assert_eq!(self.mode, HessianMode::Dense);
        debug_assert_eq!(g.len(), self.p);
        let p = self.p;
        let keep = 1.0 - gamma;
        for (r, gv) in g.iter_mut().enumerate() {
            *gv = keep * *gv + gamma * (self.q[r] + vertex.value * self.h[r * p + vertex.index]);
        }
        self.flops.estimate += 5 * p as u64 + 1;
    }

    /// d' H d for the Frank-Wolfe direction d = s - x, where s is the one-hot
    /// vertex and `g` is the estimate already computed at x. In dense mode
    /// this reuses H x = g - q and one column of H, so it costs O(p) instead
    /// of a fresh O(p^2) quadratic form.
    pub fn curvature_along(
        &mut self,
        problem: &Problem,
        x: &[f64],
        g: &[f64],
        vertex: Vertex,
    ) -> f64 {
        debug_assert_eq!(x.len(), self.p);
        match self.mode {
            HessianMode::Dense => {
                let p = self.p;
                let j = vertex.index;
                let val = vertex.value;
                let mut acc = 0.0;
                for r in 0..p {
                    let hd = val * self.h[r * p + j] - (g[r] - self.q[r]);
                    let d = if r == j { val - x[r] } else { -x[r] };
                    acc += d * hd;
                }
                self.flops.estimate += 6 * p as u64;
                acc
            }
            HessianMode::Factored => {
                let mut acc = 0.0;
                for i in 0..self.n {
                    let col = problem.column(i);
                    let m = vertex.value * col.get(vertex.index) - col.dot(x);
                    acc += self.curv[i] * m * m;
                    self.flops.estimate += 2 * col.nnz() as u64 + 5;
                }
                acc * self.inv_n
            }
        }
    }

    /// The gradient-error diagnostic: (Lhat_eff D^3 / 2n) sum_i (sum of the
    /// step sizes since observation i's last refresh)^2. `gammas[j]` must hold
    /// the step used at iteration j, for j < k (the current iteration).
    pub fn error_bound_diag(&self, problem: &Problem, gammas: &[f64], diameter: f64) -> f64 {
        let k = gammas.len();
        // suffix[j] = gamma_j + ... + gamma_{k-1}
        let mut suffix = alloc::vec![0.0; k + 1];
        for j in (0..k).rev() {
            suffix[j] = suffix[j + 1] + gammas[j];
        }
        let mut acc = 0.0;
        for &tau in &self.last_update {
            let s = suffix[(tau as usize).min(k)];
            acc += s * s;
        }
        problem.lhat_eff() * diameter * diameter * diameter / (2.0 * self.n as f64) * acc
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn last_update(&self) -> &[u64] {
        &self.last_update
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    /// Row-major dense accumulator; empty in factored mode.
    pub fn h_dense(&self) -> &[f64] {
        &self.h
    }

    pub fn mode(&self) -> HessianMode {
        self.mode
    }

    pub fn flops(&self) -> ModelFlops {
        self.flops
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::synth_problem;
    use crate::geometry::Norm;
    use crate::losses::LossFamily;
    use crate::math;
    use crate::sparse::SparseColumns;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// From-scratch per-observation Taylor sum; deliberately does not share
    /// the incremental code path.
    fn brute_force_estimate(problem: &Problem, theta: &[f64], x: &[f64]) -> Vec<f64> {
        let n = problem.n() as f64;
        let mut g = vec![0.0; problem.p()];
        for i in 0..problem.n() {
            let col = problem.column(i);
            let y = problem.label(i);
            let t = theta[i];
            let coef = (problem.family().d1(y, t)
                + problem.family().d2(y, t) * (col.dot(x) - t))
                / n;
            col.axpy_into(coef, &mut g);
        }
        g
    }

    fn dense_gram(problem: &Problem, scale: impl Fn(usize) -> f64) -> Vec<f64> {
        let p = problem.p();
        let mut h = vec![0.0; p * p];
        for i in 0..problem.n() {
            let col: Vec<(usize, f64)> = problem.column(i).iter().collect();
            for &(a, va) in &col {
                for &(b, vb) in &col {
                    h[a * p + b] += scale(i) * va * vb / problem.n() as f64;
                }
            }
        }
        h
    }

    fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    fn random_feasible(p: usize, radius: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
        // random point with ||x||_1 <= radius
        let raw: Vec<f64> = (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm: f64 = raw.iter().map(|v| v.abs()).sum();
        let target = rng.gen_range(0.0..radius);
        raw.iter().map(|v| v * target / norm.max(1e-12)).collect()
    }

    #[test]
    fn init_quadratic_is_gram_matrix() {
        let problem = synth_problem(12, 5, LossFamily::Quadratic, 3);
        let x0 = vec![0.25; 5];
        let model = TaylorModel::init(&problem, &x0, 0, HessianMode::Dense).unwrap();
        let gram = dense_gram(&problem, |_| 1.0);
        assert!(max_abs_diff(model.h_dense(), &gram) <= 1e-12);
    }

    #[test]
    fn init_logistic_at_zero_is_quarter_gram() {
        let problem = synth_problem(10, 4, LossFamily::Logistic, 4);
        let model = TaylorModel::init(&problem, &[0.0; 4], 0, HessianMode::Dense).unwrap();
        assert!(model.theta().iter().all(|&t| t == 0.0));
        let gram = dense_gram(&problem, |_| 0.25);
        assert!(max_abs_diff(model.h_dense(), &gram) <= 1e-14);
    }

    #[test]
    fn init_hand_computed_scalar_case() {
        // n = 1, p = 1, w = 2, y = 0, quadratic, x0 = 0: H = 4, q = 0
        let w = SparseColumns::new(1, vec![SparseVec::new(&[(0, 2.0)])]);
        let problem = Problem::new(w, vec![0.0], LossFamily::Quadratic, Norm::L1).unwrap();
        let model = TaylorModel::init(&problem, &[0.0], 0, HessianMode::Dense).unwrap();
        assert_eq!(model.h_dense(), &[4.0]);
        assert_eq!(model.q(), &[0.0]);
    }

    #[test]
    fn empty_batch_is_bitwise_noop() {
        let problem = synth_problem(8, 3, LossFamily::Logistic, 5);
        let mut model =
            TaylorModel::init(&problem, &problem_start(&problem), 0, HessianMode::Dense).unwrap();
        let before = model.clone();
        model.update_batch(&problem, &[], &[0.1, -0.2, 0.05], 7).unwrap();
        assert_eq!(model, before);
    }

    #[test]
    fn quadratic_batches_leave_q_and_h_unchanged() {
        let problem = synth_problem(9, 4, LossFamily::Quadratic, 6);
        let mut model =
            TaylorModel::init(&problem, &problem_start(&problem), 0, HessianMode::Dense).unwrap();
        let q0 = model.q().to_vec();
        let h0 = model.h_dense().to_vec();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for k in 1..40u64 {
            let x = random_feasible(4, 1.0, &mut rng);
            let batch: Vec<u32> = (0..9).filter(|_| rng.gen_bool(0.5)).collect();
            model.update_batch(&problem, &batch, &x, k).unwrap();
            assert_eq!(model.q(), &q0[..], "q drifted at k={k}");
            assert_eq!(model.h_dense(), &h0[..], "H drifted at k={k}");
        }
    }

    #[test]
    fn full_refresh_matches_reinit() {
        let problem = synth_problem(16, 6, LossFamily::Logistic, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut model =
            TaylorModel::init(&problem, &problem_start(&problem), 0, HessianMode::Dense).unwrap();
        let mut x = vec![0.0; 6];
        for k in 1..=25u64 {
            x = random_feasible(6, 1.0, &mut rng);
            let batch: Vec<u32> = (0..16).filter(|_| rng.gen_bool(0.3)).collect();
            model.update_batch(&problem, &batch, &x, k).unwrap();
        }
        let all: Vec<u32> = (0..16).collect();
        model.update_batch(&problem, &all, &x, 26).unwrap();
        let fresh = TaylorModel::init(&problem, &x, 26, HessianMode::Dense).unwrap();
        assert!(max_abs_diff(model.q(), fresh.q()) <= 1e-10);
        assert!(max_abs_diff(model.h_dense(), fresh.h_dense()) <= 1e-10);
        assert_eq!(model.theta(), fresh.theta());
    }

    #[test]
    fn affine_model_stays_consistent_under_interleaved_updates() {
        for mode in [HessianMode::Dense, HessianMode::Factored] {
            let problem = synth_problem(24, 5, LossFamily::Logistic, 8);
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let mut model =
                TaylorModel::init(&problem, &problem_start(&problem), 0, mode).unwrap();
            for k in 1..=60u64 {
                let x = random_feasible(5, 2.0, &mut rng);
                let size = rng.gen_range(0..=24);
                let batch: Vec<u32> =
                    rand::seq::index::sample(&mut rng, 24, size).iter().map(|i| i as u32).collect();
                model.update_batch(&problem, &batch, &x, k).unwrap();
                for _ in 0..20 {
                    let probe = random_feasible(5, 2.0, &mut rng);
                    let got = model.gradient_estimate(&problem, &probe);
                    let want = brute_force_estimate(&problem, model.theta(), &probe);
                    let scale = want.iter().fold(1.0f64, |m, v| m.max(v.abs()));
                    assert!(
                        max_abs_diff(&got, &want) <= 1e-9 * scale,
                        "{mode:?} inconsistent at k={k}"
                    );
                }
            }
        }
    }

    #[test]
    fn exact_at_expansion_points() {
        let problem = synth_problem(20, 4, LossFamily::Logistic, 9);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut model =
            TaylorModel::init(&problem, &problem_start(&problem), 0, HessianMode::Dense).unwrap();
        let all: Vec<u32> = (0..20).collect();
        for k in 1..=10u64 {
            let x = random_feasible(4, 1.5, &mut rng);
            model.update_batch(&problem, &all, &x, k).unwrap();
            let g = model.gradient_estimate(&problem, &x);
            let exact = problem.exact_gradient(&x);
            assert!(max_abs_diff(&g, &exact) <= 1e-10);
        }
    }

    #[test]
    fn dense_and_factored_agree() {
        let problem = synth_problem(15, 6, LossFamily::SigmoidSquared, 10);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x0 = problem_start(&problem);
        let mut dense = TaylorModel::init(&problem, &x0, 0, HessianMode::Dense).unwrap();
        let mut fact = TaylorModel::init(&problem, &x0, 0, HessianMode::Factored).unwrap();
        for k in 1..=15u64 {
            let x = random_feasible(6, 1.0, &mut rng);
            let batch: Vec<u32> = (0..15).filter(|_| rng.gen_bool(0.4)).collect();
            dense.update_batch(&problem, &batch, &x, k).unwrap();
            fact.update_batch(&problem, &batch, &x, k).unwrap();
            let probe = random_feasible(6, 1.0, &mut rng);
            let gd = dense.gradient_estimate(&problem, &probe);
            let gf = fact.gradient_estimate(&problem, &probe);
            assert!(max_abs_diff(&gd, &gf) <= 1e-12);
            let d = random_feasible(6, 2.0, &mut rng);
            let cd = dense.curvature(&problem, &d);
            let cf = fact.curvature(&problem, &d);
            assert!((cd - cf).abs() <= 1e-12 * cd.abs().max(1.0));
        }
    }

    #[test]
    fn curvature_examples_and_oracle() {
        let problem = synth_problem(12, 4, LossFamily::Quadratic, 11);
        let mut model =
            TaylorModel::init(&problem, &problem_start(&problem), 0, HessianMode::Dense).unwrap();
        assert_eq!(model.curvature(&problem, &[0.0; 4]), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..50 {
            let d = random_feasible(4, 3.0, &mut rng);
            let got = model.curvature(&problem, &d);
            assert!(got >= 0.0, "quadratic H is a Gram matrix");
            // direct sum oracle
            let mut want = 0.0;
            for i in 0..problem.n() {
                let m = problem.column(i).dot(&d);
                want += problem.family().d2(problem.label(i), model.theta()[i]) * m * m;
            }
            want /= problem.n() as f64;
            assert!((got - want).abs() <= 1e-9 * want.max(1.0));
        }
    }

    #[test]
    fn dense_accumulator_stays_exactly_symmetric() {
        let problem = synth_problem(20, 6, LossFamily::SigmoidSquared, 16);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut model =
            TaylorModel::init(&problem, &problem_start(&problem), 0, HessianMode::Dense).unwrap();
        for k in 1..=50u64 {
            let x = random_feasible(6, 1.0, &mut rng);
            let batch: Vec<u32> = (0..20).filter(|_| rng.gen_bool(0.4)).collect();
            model.update_batch(&problem, &batch, &x, k).unwrap();
            let h = model.h_dense();
            for a in 0..6 {
                for b in 0..6 {
                    assert_eq!(h[a * 6 + b], h[b * 6 + a], "asymmetry at ({a},{b}), k={k}");
                }
            }
        }
    }

    #[test]
    fn curvature_along_matches_explicit_direction() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for mode in [HessianMode::Dense, HessianMode::Factored] {
            let problem = synth_problem(14, 5, LossFamily::Logistic, 15);
            let mut model =
                TaylorModel::init(&problem, &problem_start(&problem), 0, mode).unwrap();
            for _ in 0..40 {
                let x = random_feasible(5, 1.0, &mut rng);
                let g = model.gradient_estimate(&problem, &x);
                let vertex = Vertex {
                    index: rng.gen_range(0..5),
                    value: if rng.gen_bool(0.5) { 1.0 } else { -1.0 },
                };
                let fast = model.curvature_along(&problem, &x, &g, vertex);
                let mut d: Vec<f64> = x.iter().map(|v| -v).collect();
                d[vertex.index] += vertex.value;
                let slow = model.curvature(&problem, &d);
                assert!((fast - slow).abs() <= 1e-9 * slow.abs().max(1.0));
            }
        }
    }

    #[test]
    fn error_bound_trivial_cases() {
        let problem = synth_problem(10, 3, LossFamily::Logistic, 12);
        let x0 = problem_start(&problem);
        let mut model = TaylorModel::init(&problem, &x0, 0, HessianMode::Dense).unwrap();
        // everything refreshed at the current iteration: empty inner sums
        let all: Vec<u32> = (0..10).collect();
        let gammas = [0.5, 0.25, 0.125];
        model.update_batch(&problem, &all, &x0, 3).unwrap();
        assert_eq!(model.error_bound_diag(&problem, &gammas, 2.0), 0.0);

        // quadratic family: Lhat_eff = 0
        let quad = synth_problem(10, 3, LossFamily::Quadratic, 12);
        let model = TaylorModel::init(&quad, &problem_start(&quad), 0, HessianMode::Dense).unwrap();
        assert_eq!(model.error_bound_diag(&quad, &gammas, 2.0), 0.0);
    }

    #[test]
    fn update_flops_follow_the_decreasing_batch_envelope() {
        // Rule-DBD sqrt(k): refreshes at perfect squares only, so update work
        // after k iterations stays within c (k p^2 + sqrt(k) n p s).
        let problem = synth_problem(32, 6, LossFamily::Logistic, 13);
        let x0 = problem_start(&problem);
        let mut model = TaylorModel::init(&problem, &x0, 0, HessianMode::Dense).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let k_max = 500u64;
        let mut x = x0;
        for k in 1..=k_max {
            let r = math::isqrt(k);
            let batch: Vec<u32> = if r * r == k { (0..32).collect() } else { Vec::new() };
            model.update_batch(&problem, &batch, &x, k).unwrap();
            x = random_feasible(6, 1.0, &mut rng);
        }
        let (n, p, s) = (32u64, 6u64, 6u64);
        let envelope = k_max * p * p + (math::isqrt(k_max) + 2) * n * p * s;
        assert!(
            model.flops().update <= 8 * envelope,
            "update flops {} exceed envelope {}",
            model.flops().update,
            8 * envelope
        );
    }

    #[test]
    fn bad_inputs_error() {
        let problem = synth_problem(4, 2, LossFamily::Logistic, 14);
        let x0 = problem_start(&problem);
        assert!(matches!(
            TaylorModel::init(&problem, &[0.0; 3], 0, HessianMode::Dense),
            Err(ModelError::DimensionMismatch { .. })
        ));
        let mut model = TaylorModel::init(&problem, &x0, 0, HessianMode::Dense).unwrap();
        assert!(matches!(
            model.update_batch(&problem, &[9], &x0, 1),
            Err(ModelError::ObservationOutOfRange { index: 9, n: 4 })
        ));
    }

    fn problem_start(problem: &Problem) -> Vec<f64> {
        let mut x = vec![0.0; problem.p()];
        x[0] = 1.0;
        x
    }
}
