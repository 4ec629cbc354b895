//! Feasible sets with linear minimization oracles.
//!
//! Only polytopes with an explicit vertex list are supported (scaled l1 ball
//! and scaled simplex), so diameters and range diameters are computed exactly
//! by vertex-pair enumeration: the maximum of a convex function over C x C is
//! attained at a pair of vertices.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::UnknownName;
use crate::math;
use crate::sparse::SparseColumns;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum SetKind {
    /// { x : ||x||_1 <= lambda }
    L1Ball,
    /// { x : x >= 0, sum x = lambda }
    Simplex,
}

/// Norm on the variable space (or on the range space for range diameters).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Norm {
    L1,
    L2,
    Linf,
}

impl Norm {
    pub fn name(self) -> &'static str {
        match self {
            Norm::L1 => "l1",
            Norm::L2 => "l2",
            Norm::Linf => "linf",
        }
    }

    pub fn of(self, v: &[f64]) -> f64 {
        match self {
            Norm::L1 => v.iter().map(|x| math::abs(*x)).sum(),
            Norm::L2 => math::sqrt(v.iter().map(|x| x * x).sum()),
            Norm::Linf => v.iter().fold(0.0, |m, x| f64::max(m, math::abs(*x))),
        }
    }
}

impl FromStr for Norm {
    type Err = UnknownName;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "l1" => Ok(Norm::L1),
            "l2" => Ok(Norm::L2),
            "linf" => Ok(Norm::Linf),
            _ => Err(UnknownName { what: "norm", expected: "l1|l2|linf" }),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum GeometryError {
    NonPositiveRadius(f64),
    EmptyVector,
}

impl fmt::Display for GeometryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeometryError::NonPositiveRadius(r) => {
                write!(f, "feasible-set radius must be positive, got {r}")
            }
            GeometryError::EmptyVector => write!(f, "lmo called with an empty vector"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for GeometryError {}

/// A one-hot vertex `value * e_index` of the feasible set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Vertex {
    pub index: usize,
    pub value: f64,
}

impl Vertex {
    pub fn to_dense(self, p: usize) -> Vec<f64> {
        let mut v = alloc::vec![0.0; p];
        v[self.index] = self.value;
        v
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FeasibleSet {
    kind: SetKind,
    radius: f64,
}

impl FeasibleSet {
    pub fn new(kind: SetKind, radius: f64) -> Result<Self, GeometryError> {
        if !(radius > 0.0) {
            return Err(GeometryError::NonPositiveRadius(radius));
        }
        Ok(FeasibleSet { kind, radius })
    }

    pub fn l1_ball(radius: f64) -> Result<Self, GeometryError> {
        Self::new(SetKind::L1Ball, radius)
    }

    pub fn simplex(radius: f64) -> Result<Self, GeometryError> {
        Self::new(SetKind::Simplex, radius)
    }

    pub fn kind(&self) -> SetKind {
        self.kind
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// All vertices in dimension p (2p for the l1 ball, p for the simplex).
    pub fn vertices(&self, p: usize) -> Vec<Vertex> {
        let lam = self.radius;
        match self.kind {
            SetKind::L1Ball => (0..p)
                .flat_map(|j| [Vertex { index: j, value: lam }, Vertex { index: j, value: -lam }])
                .collect(),
            SetKind::Simplex => (0..p).map(|j| Vertex { index: j, value: lam }).collect(),
        }
    }

    /// A deterministic starting vertex: lambda * e_0 (feasible for both kinds).
    pub fn default_vertex(&self, p: usize) -> Vec<f64> {
        Vertex { index: 0, value: self.radius }.to_dense(p)
    }

    /// argmin over the set of <g, s>, returned as a one-hot vertex.
    ///
    /// Ties break toward the lowest index and sign(0) is taken as +1, so runs
    /// are bit-reproducible.
    pub fn lmo_vertex(&self, g: &[f64]) -> Result<Vertex, GeometryError> {
        if g.is_empty() {
            return Err(GeometryError::EmptyVector);
        }
        let lam = self.radius;
        match self.kind {
            SetKind::L1Ball => {
                let mut best = 0usize;
                let mut best_abs = math::abs(g[0]);
                for (j, &gj) in g.iter().enumerate().skip(1) {
                    let a = math::abs(gj);
                    if a > best_abs {
                        best = j;
                        best_abs = a;
                    }
                }
                let value = if g[best] >= 0.0 { -lam } else { lam };
                Ok(Vertex { index: best, value })
            }
            SetKind::Simplex => {
                let mut best = 0usize;
                for (j, &gj) in g.iter().enumerate().skip(1) {
                    if gj < g[best] {
                        best = j;
                    }
                }
                Ok(Vertex { index: best, value: lam })
            }
        }
    }

    /// Dense-vector form of [`Self::lmo_vertex`].
    pub fn lmo(&self, g: &[f64]) -> Result<Vec<f64>, GeometryError> {
        Ok(self.lmo_vertex(g)?.to_dense(g.len()))
    }

    /// Exact diameter max_{u,v in C} ||u - v|| by vertex-pair enumeration.
    pub fn diameter(&self, p: usize, norm: Norm) -> f64 {
        let verts = self.vertices(p);
        let mut best = 0.0;
        for a in &verts {
            for b in &verts {
                best = f64::max(best, one_hot_diff_norm(*a, *b, norm));
            }
        }
        best
    }

    /// Exact range diameter max_{x,y in C} ||W'(x - y)||_q by vertex-pair
    /// enumeration; W is p x n with p = W.dim().
    pub fn range_diameter(&self, w: &SparseColumns, q: Norm) -> f64 {
        let verts = self.vertices(w.dim());
        let rows = w.dense_rows();
        let n = w.n_cols();
        let mut diff = alloc::vec![0.0; n];
        let mut best = 0.0;
        for (ai, a) in verts.iter().enumerate() {
            // || W'(a - b) || = || W'(b - a) ||, so unordered pairs suffice.
            for b in verts.iter().skip(ai + 1) {
                let ra = &rows[a.index];
                let rb = &rows[b.index];
                for i in 0..n {
                    diff[i] = a.value * ra[i] - b.value * rb[i];
                }
                best = f64::max(best, q.of(&diff));
            }
        }
        best
    }

    /// Membership up to a relative tolerance, for validating start points.
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        let lam = self.radius;
        match self.kind {
            SetKind::L1Ball => Norm::L1.of(x) <= lam * (1.0 + tol),
            SetKind::Simplex => {
                let sum: f64 = x.iter().sum();
                x.iter().all(|&v| v >= -lam * tol) && math::abs(sum - lam) <= lam * tol
            }
        }
    }
}

/// || a.value * e_a - b.value * e_b || for one-hot vertices, in O(1).
fn one_hot_diff_norm(a: Vertex, b: Vertex, norm: Norm) -> f64 {
    if a.index == b.index {
        return math::abs(a.value - b.value);
    }
    let (x, y) = (math::abs(a.value), math::abs(b.value));
    match norm {
        Norm::L1 => x + y,
        Norm::L2 => math::sqrt(x * x + y * y),
        Norm::Linf => f64::max(x, y),
    }
}

impl SetKind {
    pub fn name(self) -> &'static str {
        match self {
            SetKind::L1Ball => "l1",
            SetKind::Simplex => "simplex",
        }
    }
}

impl FromStr for SetKind {
    type Err = UnknownName;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "l1" => Ok(SetKind::L1Ball),
            "simplex" => Ok(SetKind::Simplex),
            _ => Err(UnknownName { what: "feasible set", expected: "l1|simplex" }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::SparseVec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn lmo_examples() {
        let ball2 = FeasibleSet::l1_ball(2.0).unwrap();
        assert_eq!(ball2.lmo(&[3.0, -1.0, 0.0]).unwrap(), vec![-2.0, 0.0, 0.0]);
        let simplex = FeasibleSet::simplex(1.0).unwrap();
        assert_eq!(simplex.lmo(&[2.0, -1.0]).unwrap(), vec![0.0, 1.0]);
        // tie-break lowest index; sign(0) = +1
        let ball1 = FeasibleSet::l1_ball(1.0).unwrap();
        assert_eq!(ball1.lmo(&[1.0, 1.0]).unwrap(), vec![-1.0, 0.0]);
        assert_eq!(ball1.lmo(&[0.0, 0.0]).unwrap(), vec![-1.0, 0.0]);
    }

    #[test]
    fn lmo_empty_vector_errors() {
        let ball = FeasibleSet::l1_ball(1.0).unwrap();
        assert_eq!(ball.lmo(&[]), Err(GeometryError::EmptyVector));
    }

    #[test]
    fn radius_must_be_positive() {
        assert!(FeasibleSet::l1_ball(0.0).is_err());
        assert!(FeasibleSet::l1_ball(-1.0).is_err());
        assert!(FeasibleSet::l1_ball(f64::NAN).is_err());
    }

    #[test]
    fn lmo_optimality_exhaustive() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for kind in [SetKind::L1Ball, SetKind::Simplex] {
            let set = FeasibleSet::new(kind, 1.5).unwrap();
            for _ in 0..500 {
                let p = rng.gen_range(1..=12);
                let g: Vec<f64> = (0..p).map(|_| rng.gen_range(-4.0..4.0)).collect();
                let s = set.lmo_vertex(&g).unwrap();
                let obj = s.value * g[s.index];
                for v in set.vertices(p) {
                    assert!(obj <= v.value * g[v.index]);
                }
            }
        }
    }

    #[test]
    fn lmo_membership() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let lam = 2.5;
        let ball = FeasibleSet::l1_ball(lam).unwrap();
        let simplex = FeasibleSet::simplex(lam).unwrap();
        for _ in 0..100 {
            let g: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let s = ball.lmo(&g).unwrap();
            assert_eq!(Norm::L1.of(&s), lam);
            let s = simplex.lmo(&g).unwrap();
            assert!(s.iter().all(|&v| v >= 0.0));
            assert_eq!(s.iter().sum::<f64>(), lam);
        }
    }

    #[test]
    fn diameter_examples() {
        let ball = FeasibleSet::l1_ball(1.0).unwrap();
        assert_eq!(ball.diameter(3, Norm::L2), 2.0);
        assert_eq!(ball.diameter(1, Norm::Linf), 2.0);
        let simplex = FeasibleSet::simplex(1.0).unwrap();
        assert_eq!(simplex.diameter(4, Norm::L1), 2.0);
        assert_eq!(simplex.diameter(1, Norm::L1), 0.0);
        let ball3 = FeasibleSet::l1_ball(3.0).unwrap();
        assert_eq!(ball3.diameter(2, Norm::L1), 6.0);
    }

    #[test]
    fn range_diameter_examples() {
        // W = identity, p = n = 2
        let w = SparseColumns::new(
            2,
            vec![SparseVec::new(&[(0, 1.0)]), SparseVec::new(&[(1, 1.0)])],
        );
        let ball = FeasibleSet::l1_ball(1.0).unwrap();
        assert_eq!(ball.range_diameter(&w, Norm::Linf), 2.0);

        // columns w1 = (1, 3), w2 = (2, -4); max at x = e2, y = -e2: |W' 2e2|_inf = 8
        let w = SparseColumns::new(
            2,
            vec![
                SparseVec::new(&[(0, 1.0), (1, 3.0)]),
                SparseVec::new(&[(0, 2.0), (1, -4.0)]),
            ],
        );
        assert_eq!(ball.range_diameter(&w, Norm::Linf), 8.0);

        let zero = SparseColumns::new(3, vec![SparseVec::new(&[]), SparseVec::new(&[])]);
        let simplex = FeasibleSet::simplex(1.0).unwrap();
        for q in [Norm::L1, Norm::L2, Norm::Linf] {
            assert_eq!(simplex.range_diameter(&zero, q), 0.0);
        }
    }

    #[test]
    fn range_diameter_inf_closed_form() {
        // D_inf = 2 lambda max_ij |W_ij| for the l1 ball.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let p = rng.gen_range(1..=6);
            let n = rng.gen_range(1..=8);
            let mut cols: Vec<SparseVec> = Vec::new();
            for _ in 0..n {
                let mut entries: Vec<(u32, f64)> = Vec::new();
                for j in 0..p {
                    if rng.gen_bool(0.7) {
                        entries.push((j as u32, rng.gen_range(-3.0..3.0)));
                    }
                }
                cols.push(SparseVec::new(&entries));
            }
            let w = SparseColumns::new(p, cols);
            let lam = rng.gen_range(0.5..4.0);
            let ball = FeasibleSet::l1_ball(lam).unwrap();
            let max_abs = w
                .columns()
                .iter()
                .map(|c| c.inf_norm())
                .fold(0.0, f64::max);
            let enumerated = ball.range_diameter(&w, Norm::Linf);
            assert!((enumerated - 2.0 * lam * max_abs).abs() <= 1e-12);
        }
    }

    #[test]
    fn range_diameter_scales_with_radius() {
        let w = SparseColumns::new(
            3,
            vec![
                SparseVec::new(&[(0, 0.3), (2, -1.4)]),
                SparseVec::new(&[(1, 2.0)]),
                SparseVec::new(&[(0, -0.7), (1, 0.2), (2, 0.9)]),
            ],
        );
        for kind in [SetKind::L1Ball, SetKind::Simplex] {
            let unit = FeasibleSet::new(kind, 1.0).unwrap();
            for lam in [0.25, 3.0, 17.5] {
                let scaled = FeasibleSet::new(kind, lam).unwrap();
                for q in [Norm::L1, Norm::L2, Norm::Linf] {
                    let a = scaled.range_diameter(&w, q);
                    let b = lam * unit.range_diameter(&w, q);
                    assert!((a - b).abs() <= 1e-12 * b.max(1.0));
                }
            }
        }
    }

    #[test]
    fn diameter_scales_with_radius() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for kind in [SetKind::L1Ball, SetKind::Simplex] {
            let unit = FeasibleSet::new(kind, 1.0).unwrap();
            for _ in 0..10 {
                let lam = rng.gen_range(0.1..10.0);
                let scaled = FeasibleSet::new(kind, lam).unwrap();
                for norm in [Norm::L1, Norm::L2, Norm::Linf] {
                    let a = scaled.diameter(5, norm);
                    let b = lam * unit.diameter(5, norm);
                    assert!((a - b).abs() <= 1e-12 * b.max(1.0));
                }
            }
        }
    }
}
