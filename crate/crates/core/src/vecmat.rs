//! Dense vectors and compressed-sparse-row matrices.
//!
//! Every kernel here sums in a fixed order (row by row, left to right inside a
//! row) so that serial runs are bitwise reproducible.

use std::ops::{Deref, DerefMut};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error, Result};

/// Relative tolerance used when a caller does not pick one for [`SparseMatrix::spectral_norm`].
pub const DEFAULT_NORM_TOL: f64 = 1e-8;
pub const DEFAULT_NORM_MAX_ITER: usize = 10_000;

/// A vector of finite reals.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DenseVector(Vec<f64>);

impl DenseVector {
    /// Rejects NaN and infinite entries.
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if let Some(index) = entries.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(DenseVector(entries))
    }

    /// Wraps entries produced by arithmetic on finite inputs.
    pub(crate) fn from_raw(entries: Vec<f64>) -> Self {
        DenseVector(entries)
    }

    pub fn zeros(n: usize) -> Self {
        DenseVector(vec![0.0; n])
    }

    pub fn filled(n: usize, value: f64) -> Self {
        DenseVector(vec![value; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        dot(&self.0, other)
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn norm_sq(&self) -> f64 {
        dot(&self.0, &self.0)
    }

    pub fn scaled(&self, s: f64) -> Self {
        DenseVector(self.0.iter().map(|v| s * v).collect())
    }

    /// `self + s * other`
    pub fn add_scaled(&self, s: f64, other: &[f64]) -> Self {
        debug_assert_eq!(self.len(), other.len());
        DenseVector(self.0.iter().zip(other).map(|(a, b)| a + s * b).collect())
    }

    pub fn sub(&self, other: &[f64]) -> Self {
        self.add_scaled(-1.0, other)
    }
}

impl Deref for DenseVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for DenseVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        s += x * y;
    }
    s
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        s += d * d;
    }
    s
}

/// Compressed-sparse-row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn new(
        n_rows: usize,
        n_cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if n_rows == 0 || n_cols == 0 {
            return Err(Error::InvalidMatrix("dimensions must be positive".into()));
        }
        if row_offsets.len() != n_rows + 1 {
            return Err(Error::InvalidMatrix(format!(
                "row_offsets has length {}, expected {}",
                row_offsets.len(),
                n_rows + 1
            )));
        }
        if row_offsets[0] != 0 {
            return Err(Error::InvalidMatrix("row_offsets must start at 0".into()));
        }
        if row_offsets.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidMatrix("row_offsets must be nondecreasing".into()));
        }
        let nnz = row_offsets[n_rows];
        if col_indices.len() != nnz || values.len() != nnz {
            return Err(Error::InvalidMatrix(format!(
                "expected {nnz} stored entries, got {} indices and {} values",
                col_indices.len(),
                values.len()
            )));
        }
        for row in 0..n_rows {
            let cols = &col_indices[row_offsets[row]..row_offsets[row + 1]];
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidMatrix(format!(
                    "column indices of row {row} are not strictly increasing"
                )));
            }
            if let Some(&c) = cols.last() {
                if c >= n_cols {
                    return Err(Error::InvalidMatrix(format!(
                        "column index {c} out of range in row {row}"
                    )));
                }
            }
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(SparseMatrix {
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        for &(r, c, _) in &sorted {
            if r >= n_rows || c >= n_cols {
                return Err(Error::InvalidMatrix(format!(
                    "entry ({r}, {c}) outside a {n_rows}x{n_cols} matrix"
                )));
            }
        }
        sorted.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_offsets = vec![0usize; n_rows + 1];
        let mut col_indices = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in sorted {
            if last == Some((r, c)) {
                *values.last_mut().expect("duplicate follows an entry") += v;
                continue;
            }
            row_offsets[r + 1] += 1;
            col_indices.push(c);
            values.push(v);
            last = Some((r, c));
        }
        for r in 0..n_rows {
            row_offsets[r + 1] += row_offsets[r];
        }
        SparseMatrix::new(n_rows, n_cols, row_offsets, col_indices, values)
    }

    /// Builds from dense rows, storing only nonzero entries.
    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, |r| r.len());
        let mut triplets = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            check_dim("from_dense row length", n_cols, row.len())?;
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    triplets.push((i, j, v));
                }
            }
        }
        SparseMatrix::from_triplets(n_rows, n_cols, &triplets)
    }

    pub fn identity(n: usize) -> Result<Self> {
        let triplets: Vec<_> = (0..n).map(|i| (i, i, 1.0)).collect();
        SparseMatrix::from_triplets(n, n, &triplets)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.n_cols]; self.n_rows];
        for (i, row) in out.iter_mut().enumerate() {
            for k in self.row_offsets[i]..self.row_offsets[i + 1] {
                row[self.col_indices[k]] = self.values[k];
            }
        }
        out
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        let range = self.row_offsets[row]..self.row_offsets[row + 1];
        match self.col_indices[range.clone()].binary_search(&col) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    /// Iterates stored entries as `(row, col, value)` in storage order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_rows).flat_map(move |i| {
            (self.row_offsets[i]..self.row_offsets[i + 1])
                .map(move |k| (i, self.col_indices[k], self.values[k]))
        })
    }

    /// Applies `f` to every stored value and drops entries that become zero.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> SparseMatrix {
        let mut row_offsets = Vec::with_capacity(self.n_rows + 1);
        let mut col_indices = Vec::with_capacity(self.nnz());
        let mut values = Vec::with_capacity(self.nnz());
        row_offsets.push(0);
        for i in 0..self.n_rows {
            for k in self.row_offsets[i]..self.row_offsets[i + 1] {
                let v = f(self.values[k]);
                if v != 0.0 {
                    col_indices.push(self.col_indices[k]);
                    values.push(v);
                }
            }
            row_offsets.push(values.len());
        }
        SparseMatrix {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            row_offsets,
            col_indices,
            values,
        }
    }

    pub fn scaled(&self, s: f64) -> SparseMatrix {
        self.map_values(|v| s * v)
    }

    /// `a * self + b * other`, entrywise over the union of both patterns.
    /// Entries that cancel to exactly zero are dropped.
    pub fn lincomb(&self, a: f64, other: &SparseMatrix, b: f64) -> Result<SparseMatrix> {
        check_dim("lincomb rows", self.n_rows, other.n_rows)?;
        check_dim("lincomb cols", self.n_cols, other.n_cols)?;
        let mut row_offsets = Vec::with_capacity(self.n_rows + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        row_offsets.push(0);
        for i in 0..self.n_rows {
            let (mut p, pe) = (self.row_offsets[i], self.row_offsets[i + 1]);
            let (mut q, qe) = (other.row_offsets[i], other.row_offsets[i + 1]);
            while p < pe || q < qe {
                let cp = if p < pe { self.col_indices[p] } else { usize::MAX };
                let cq = if q < qe { other.col_indices[q] } else { usize::MAX };
                let (col, v) = if cp == cq {
                    let v = a * self.values[p] + b * other.values[q];
                    p += 1;
                    q += 1;
                    (cp, v)
                } else if cp < cq {
                    let v = a * self.values[p];
                    p += 1;
                    (cp, v)
                } else {
                    let v = b * other.values[q];
                    q += 1;
                    (cq, v)
                };
                if v != 0.0 {
                    col_indices.push(col);
                    values.push(v);
                }
            }
            row_offsets.push(values.len());
        }
        Ok(SparseMatrix {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut counts = vec![0usize; self.n_cols + 1];
        for &c in &self.col_indices {
            counts[c + 1] += 1;
        }
        for c in 0..self.n_cols {
            counts[c + 1] += counts[c];
        }
        let row_offsets = counts.clone();
        let mut next = counts;
        let mut col_indices = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.n_rows {
            for k in self.row_offsets[i]..self.row_offsets[i + 1] {
                let c = self.col_indices[k];
                let slot = next[c];
                col_indices[slot] = i;
                values[slot] = self.values[k];
                next[c] += 1;
            }
        }
        SparseMatrix {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            row_offsets,
            col_indices,
            values,
        }
    }

    /// `A x`.
    pub fn spmv(&self, x: &[f64]) -> Result<DenseVector> {
        check_dim("spmv", self.n_cols, x.len())?;
        let mut out = vec![0.0; self.n_rows];
        self.spmv_into(x, &mut out);
        Ok(DenseVector::from_raw(out))
    }

    /// `A^T y`.
    pub fn spmv_transpose(&self, y: &[f64]) -> Result<DenseVector> {
        check_dim("spmv_transpose", self.n_rows, y.len())?;
        let mut out = vec![0.0; self.n_cols];
        self.spmv_transpose_into(y, &mut out);
        Ok(DenseVector::from_raw(out))
    }

    /// Unchecked `out = A x`; lengths are the caller's responsibility.
    pub fn spmv_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_cols);
        debug_assert_eq!(out.len(), self.n_rows);
        for (i, o) in out.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.row_offsets[i]..self.row_offsets[i + 1] {
                s += self.values[k] * x[self.col_indices[k]];
            }
            *o = s;
        }
    }

    /// Unchecked `out = A^T y`; scatters row by row.
    pub fn spmv_transpose_into(&self, y: &[f64], out: &mut [f64]) {
        debug_assert_eq!(y.len(), self.n_rows);
        debug_assert_eq!(out.len(), self.n_cols);
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, &yi) in y.iter().enumerate() {
            for k in self.row_offsets[i]..self.row_offsets[i + 1] {
                out[self.col_indices[k]] += self.values[k] * yi;
            }
        }
    }

    /// Largest singular value by power iteration on `A^T A` from a seeded
    /// random start.
    ///
    /// Stops once the estimated remaining error of the Rayleigh quotient,
    /// extrapolated from the ratio of successive increments, falls below
    /// `tol` relative.
    pub fn spectral_norm(&self, tol: f64, max_iter: usize, seed: u64) -> Result<f64> {
        if !(tol > 0.0) {
            return Err(Error::InvalidParameter(format!("tol must be positive, got {tol}")));
        }
        if self.values.iter().all(|&v| v == 0.0) {
            return Ok(0.0);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v: Vec<f64> = (0..self.n_cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let nv = norm(&v);
        v.iter_mut().for_each(|e| *e /= nv);

        let mut av = vec![0.0; self.n_rows];
        let mut w = vec![0.0; self.n_cols];
        let mut lambda = 0.0;
        let mut prev_inc = f64::INFINITY;
        for it in 1..=max_iter {
            self.spmv_into(&v, &mut av);
            self.spmv_transpose_into(&av, &mut w);
            let next = dot(&av, &av);
            let nw = norm(&w);
            if nw == 0.0 {
                // start vector fell into the null space; nothing more to learn
                return Ok(next.sqrt());
            }
            for (vi, wi) in v.iter_mut().zip(&w) {
                *vi = wi / nw;
            }
            let inc = (next - lambda).abs();
            lambda = next;
            if it > 1 {
                if inc == 0.0 {
                    return Ok(lambda.sqrt());
                }
                let ratio = (inc / prev_inc).clamp(0.0, 0.999_999);
                let remaining = inc * ratio / (1.0 - ratio);
                // sigma = sqrt(lambda), so half the relative error carries over
                if inc <= tol * lambda && remaining <= tol * lambda {
                    return Ok(lambda.sqrt());
                }
            }
            prev_inc = inc;
        }
        Err(Error::NoConvergence {
            estimate: lambda.sqrt(),
            iterations: max_iter,
        })
    }

    pub fn spectral_norm_default(&self) -> Result<f64> {
        self.spectral_norm(DEFAULT_NORM_TOL, DEFAULT_NORM_MAX_ITER, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn appendix_matrix() -> SparseMatrix {
        SparseMatrix::from_dense(&[vec![297.0, -200.0], vec![-100.0, 396.0]]).unwrap()
    }

    #[test]
    fn identity_products() {
        let i2 = SparseMatrix::identity(2).unwrap();
        assert_eq!(i2.spmv(&[3.0, -1.0]).unwrap().as_slice(), &[3.0, -1.0]);
        assert_eq!(i2.spmv_transpose(&[3.0, -1.0]).unwrap().as_slice(), &[3.0, -1.0]);
    }

    #[test]
    fn fee_matrix_products() {
        let a = appendix_matrix();
        assert_eq!(a.spmv(&[0.5, 0.5]).unwrap().as_slice(), &[48.5, 148.0]);
        assert_eq!(a.spmv_transpose(&[1.0, 0.0]).unwrap().as_slice(), &[297.0, -200.0]);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let a = appendix_matrix();
        assert!(matches!(a.spmv(&[1.0]), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(
            a.spmv_transpose(&[1.0, 2.0, 3.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn rejects_malformed_csr() {
        assert!(SparseMatrix::new(2, 2, vec![0, 1], vec![0], vec![1.0]).is_err());
        assert!(SparseMatrix::new(1, 3, vec![0, 2], vec![2, 1], vec![1.0, 1.0]).is_err());
        assert!(SparseMatrix::new(1, 3, vec![0, 2], vec![1, 1], vec![1.0, 1.0]).is_err());
        assert!(SparseMatrix::new(2, 2, vec![0, 2, 1], vec![0, 1], vec![1.0, 1.0]).is_err());
        assert!(SparseMatrix::new(1, 2, vec![0, 1], vec![0], vec![f64::NAN]).is_err());
        assert!(DenseVector::new(vec![1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn spectral_norm_simple_cases() {
        let d = SparseMatrix::from_dense(&[vec![3.0, 0.0], vec![0.0, 4.0]]).unwrap();
        let s = d.spectral_norm(1e-10, 10_000, 0).unwrap();
        assert!((s - 4.0).abs() <= 4.0 * 1e-10, "{s}");
        let id = SparseMatrix::identity(7).unwrap();
        assert!((id.spectral_norm_default().unwrap() - 1.0).abs() <= 1e-8);
    }

    #[test]
    fn spectral_norm_reports_non_convergence() {
        let d = SparseMatrix::from_dense(&[vec![1.0, 0.0], vec![0.0, 0.999]]).unwrap();
        match d.spectral_norm(1e-14, 3, 1) {
            Err(Error::NoConvergence { estimate, iterations }) => {
                assert_eq!(iterations, 3);
                assert!(estimate > 0.9);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn transpose_and_lincomb() {
        let a = appendix_matrix();
        let t = a.transpose();
        assert_eq!(t.to_dense(), vec![vec![297.0, -100.0], vec![-200.0, 396.0]]);
        let z = a.lincomb(1.0, &a, -1.0).unwrap();
        assert_eq!(z.nnz(), 0);
        let s = a.lincomb(0.5, &t, 0.5).unwrap();
        assert_eq!(s.get(0, 1), -150.0);
    }
}
