//! Column-major sparse feature storage.
//!
//! Observations are stored one sparse column each, because every hot loop
//! (Taylor-point refreshes, margin evaluation) walks per-observation features.

use alloc::vec::Vec;

use crate::math;

/// One sparse vector with sorted, unique indices.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseVec {
    idx: Vec<u32>,
    val: Vec<f64>,
}

impl SparseVec {
    /// Builds from (index, value) entries; indices must be strictly increasing.
    pub fn new(entries: &[(u32, f64)]) -> Self {
        debug_assert!(entries.windows(2).all(|w| w[0].0 < w[1].0));
        SparseVec {
            idx: entries.iter().map(|e| e.0).collect(),
            val: entries.iter().map(|e| e.1).collect(),
        }
    }

    pub fn from_dense(x: &[f64]) -> Self {
        let mut idx = Vec::new();
        let mut val = Vec::new();
        for (j, &v) in x.iter().enumerate() {
            if v != 0.0 {
                idx.push(j as u32);
                val.push(v);
            }
        }
        SparseVec { idx, val }
    }

    pub fn nnz(&self) -> usize {
        self.idx.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.idx.iter().zip(&self.val).map(|(&i, &v)| (i as usize, v))
    }

    pub fn indices(&self) -> &[u32] {
        &self.idx
    }

    pub fn values(&self) -> &[f64] {
        &self.val
    }

    /// Entry at index j (0.0 if not stored).
    pub fn get(&self, j: usize) -> f64 {
        match self.idx.binary_search(&(j as u32)) {
            Ok(pos) => self.val[pos],
            Err(_) => 0.0,
        }
    }

    pub fn max_index(&self) -> Option<u32> {
        self.idx.last().copied()
    }

    /// <w, x> against a dense vector.
    pub fn dot(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (i, v) in self.iter() {
            acc += v * x[i];
        }
        acc
    }

    /// out += c * w.
    pub fn axpy_into(&self, c: f64, out: &mut [f64]) {
        for (i, v) in self.iter() {
            out[i] += c * v;
        }
    }

    pub fn inf_norm(&self) -> f64 {
        self.val.iter().fold(0.0, |m, &v| f64::max(m, math::abs(v)))
    }

    pub fn l2_norm(&self) -> f64 {
        math::sqrt(self.val.iter().map(|v| v * v).sum())
    }

    pub fn scale(&mut self, c: f64) {
        for v in &mut self.val {
            *v *= c;
        }
    }
}

/// A p x n matrix stored as n sparse columns (one per observation).
#[derive(Clone, Debug, PartialEq)]
pub struct SparseColumns {
    rows: usize,
    cols: Vec<SparseVec>,
}

impl SparseColumns {
    /// `rows` is the variable dimension p; each column is one observation.
    pub fn new(rows: usize, cols: Vec<SparseVec>) -> Self {
        debug_assert!(cols
            .iter()
            .all(|c| c.max_index().map_or(true, |m| (m as usize) < rows)));
        SparseColumns { rows, cols }
    }

    /// Variable dimension p.
    pub fn dim(&self) -> usize {
        self.rows
    }

    /// Number of observations n.
    pub fn n_cols(&self) -> usize {
        self.cols.len()
    }

    pub fn column(&self, i: usize) -> &SparseVec {
        &self.cols[i]
    }

    pub fn columns(&self) -> &[SparseVec] {
        &self.cols
    }

    pub fn columns_mut(&mut self) -> &mut [SparseVec] {
        &mut self.cols
    }

    /// Total stored entries across all columns.
    pub fn nnz(&self) -> usize {
        self.cols.iter().map(|c| c.nnz()).sum()
    }

    /// Largest column support size (the `s` of the cost model).
    pub fn max_col_nnz(&self) -> usize {
        self.cols.iter().map(|c| c.nnz()).max().unwrap_or(0)
    }

    /// Dense row r as a length-n vector: `(w_1[r], ..., w_n[r])`.
    pub fn dense_row(&self, r: usize) -> Vec<f64> {
        let mut out = alloc::vec![0.0; self.cols.len()];
        for (i, col) in self.cols.iter().enumerate() {
            for (j, v) in col.iter() {
                if j == r {
                    out[i] = v;
                }
            }
        }
        out
    }

    /// All dense rows at once; avoids rescanning columns per row.
    pub fn dense_rows(&self) -> Vec<Vec<f64>> {
        let mut rows = alloc::vec![alloc::vec![0.0; self.cols.len()]; self.rows];
        for (i, col) in self.cols.iter().enumerate() {
            for (j, v) in col.iter() {
                rows[j][i] = v;
            }
        }
        rows
    }
}
