//! Minimal dense/sparse linear algebra for the embedding trainer.
//!
//! Dense products parallelize over output rows with a sequential inner
//! reduction, so results are identical regardless of worker count.

use rayon::prelude::*;

use crate::scalar::Scalar;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Scalar> Matrix<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![S::zero(); rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<S>) -> Self {
        assert_eq!(data.len(), rows * cols, "data length must match shape");
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[S] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [S] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> S {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: S) {
        self.data[r * self.cols + c] = v;
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    /// `self * other`
    pub fn matmul(&self, other: &Matrix<S>) -> Matrix<S> {
        assert_eq!(self.cols, other.rows, "inner dimensions must agree");
        let mut out = Matrix::zeros(self.rows, other.cols);
        let oc = other.cols;
        out.data
            .par_chunks_mut(oc)
            .enumerate()
            .for_each(|(i, out_row)| {
                let a_row = self.row(i);
                for (k, &a) in a_row.iter().enumerate() {
                    if a == S::zero() {
                        continue;
                    }
                    let b_row = other.row(k);
                    for (o, &b) in out_row.iter_mut().zip(b_row) {
                        *o += a * b;
                    }
                }
            });
        out
    }

    /// `self^T * other` (shared row count).
    pub fn transpose_matmul(&self, other: &Matrix<S>) -> Matrix<S> {
        assert_eq!(self.rows, other.rows, "row counts must agree");
        let mut out = Matrix::zeros(self.cols, other.cols);
        // Accumulate sequentially over the shared dimension: output is small
        // (parameter-sized), inputs are tall.
        for r in 0..self.rows {
            let a_row = self.row(r);
            let b_row = other.row(r);
            for (i, &a) in a_row.iter().enumerate() {
                if a == S::zero() {
                    continue;
                }
                let out_row = out.row_mut(i);
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self * other^T`
    pub fn matmul_transpose(&self, other: &Matrix<S>) -> Matrix<S> {
        assert_eq!(self.cols, other.cols, "column counts must agree");
        let mut out = Matrix::zeros(self.rows, other.rows);
        let oc = other.rows;
        out.data
            .par_chunks_mut(oc)
            .enumerate()
            .for_each(|(i, out_row)| {
                let a_row = self.row(i);
                for (j, o) in out_row.iter_mut().enumerate() {
                    let b_row = other.row(j);
                    let mut acc = S::zero();
                    for (&a, &b) in a_row.iter().zip(b_row) {
                        acc += a * b;
                    }
                    *o = acc;
                }
            });
        out
    }

    pub fn map_inplace(&mut self, f: impl Fn(S) -> S + Sync) {
        self.data.par_iter_mut().for_each(|v| *v = f(*v));
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: S, other: &Matrix<S>) {
        assert_eq!(self.rows, other.rows);
        assert_eq!(self.cols, other.cols);
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    /// Scale every row to unit L2 norm; zero rows are left untouched.
    pub fn normalize_rows(&mut self) {
        let cols = self.cols;
        self.data.par_chunks_mut(cols).for_each(|row| {
            let norm = row.iter().map(|&v| v * v).sum::<S>().sqrt();
            if norm > S::zero() {
                for v in row {
                    *v /= norm;
                }
            }
        });
    }
}

/// Symmetric sparse matrix in CSR form.
#[derive(Debug, Clone)]
pub struct CsrMatrix<S> {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    values: Vec<S>,
}

impl<S: Scalar> CsrMatrix<S> {
    /// Build from per-row sorted `(col, value)` lists.
    pub fn from_rows(rows: Vec<Vec<(u32, S)>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for row in rows {
            debug_assert!(row.windows(2).all(|w| w[0].0 < w[1].0), "sorted, no dups");
            for (c, v) in row {
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row_entries(&self, r: usize) -> impl Iterator<Item = (u32, S)> + '_ {
        let lo = self.row_ptr[r];
        let hi = self.row_ptr[r + 1];
        self.col_idx[lo..hi]
            .iter()
            .zip(&self.values[lo..hi])
            .map(|(&c, &v)| (c, v))
    }

    pub fn get(&self, r: usize, c: usize) -> S {
        self.row_entries(r)
            .find(|&(col, _)| col as usize == c)
            .map(|(_, v)| v)
            .unwrap_or_else(S::zero)
    }

    /// Sparse-dense product `self * dense`.
    pub fn spmm(&self, dense: &Matrix<S>) -> Matrix<S> {
        assert_eq!(self.n, dense.rows(), "inner dimensions must agree");
        let cols = dense.cols();
        let mut out = Matrix::zeros(self.n, cols);
        out.data
            .par_chunks_mut(cols)
            .enumerate()
            .for_each(|(i, out_row)| {
                for (c, v) in self.row_entries(i) {
                    let d_row = dense.row(c as usize);
                    for (o, &d) in out_row.iter_mut().zip(d_row) {
                        *o += v * d;
                    }
                }
            });
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_matmul(a: &Matrix<f64>, b: &Matrix<f64>) -> Matrix<f64> {
        let mut out = Matrix::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut acc = 0.0;
                for k in 0..a.cols() {
                    acc += a.get(i, k) * b.get(k, j);
                }
                out.set(i, j, acc);
            }
        }
        out
    }

    #[test]
    fn matmul_matches_naive() {
        let a = Matrix::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let b = Matrix::from_vec(3, 2, vec![7.0, 8.0, 9.0, 10.0, 11.0, 12.0]);
        assert_eq!(a.matmul(&b), naive_matmul(&a, &b));
    }

    #[test]
    fn transpose_products() {
        let a = Matrix::from_vec(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let b = Matrix::from_vec(3, 2, vec![1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        // a^T b == (naive on explicit transpose)
        let at = Matrix::from_vec(2, 3, vec![1.0, 3.0, 5.0, 2.0, 4.0, 6.0]);
        assert_eq!(a.transpose_matmul(&b), naive_matmul(&at, &b));
        // a b^T
        let bt = Matrix::from_vec(2, 3, vec![1.0, 0.0, 1.0, 0.0, 1.0, 1.0]);
        assert_eq!(a.matmul_transpose(&b), naive_matmul(&a, &bt));
    }

    #[test]
    fn spmm_matches_dense() {
        // 3-node path graph, unweighted
        let csr = CsrMatrix::from_rows(vec![
            vec![(1, 1.0)],
            vec![(0, 1.0), (2, 1.0)],
            vec![(1, 1.0)],
        ]);
        let x = Matrix::from_vec(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let dense = Matrix::from_vec(3, 3, vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
        assert_eq!(csr.spmm(&x), naive_matmul(&dense, &x));
    }

    #[test]
    fn normalize_rows_unit_norm() {
        let mut m = Matrix::from_vec(2, 2, vec![3.0, 4.0, 0.0, 0.0]);
        m.normalize_rows();
        assert!((m.get(0, 0) - 0.6).abs() < 1e-12);
        assert!((m.get(0, 1) - 0.8).abs() < 1e-12);
        assert_eq!(m.row(1), &[0.0, 0.0]);
    }
}
