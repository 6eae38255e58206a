//! Distance and embedding matrix types shared across the pipeline.

use std::io::{Read, Write};

use rayon::prelude::*;

use crate::error::{AlignError, Result};
use crate::kg::EntityId;
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Dense source x target distance matrix.
///
/// Rows are source entities, columns target entities. All values are finite
/// and non-negative: cosine-derived matrices lie in `[0, 2]`, normalized
/// string matrices in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Scalar> DistanceMatrix<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DistanceMatrix {
            rows,
            cols,
            data: vec![S::zero(); rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<S>) -> Self {
        assert_eq!(data.len(), rows * cols, "data length must match shape");
        DistanceMatrix { rows, cols, data }
    }

    pub fn from_rows(rows: Vec<Vec<S>>) -> Self {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == m), "ragged rows");
        DistanceMatrix {
            rows: n,
            cols: m,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> S {
        self.data[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, v: S) {
        self.data[row * self.cols + col] = v;
    }

    pub fn row(&self, row: usize) -> &[S] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub(crate) fn par_fill_rows(&mut self, f: impl Fn(usize, &mut [S]) + Sync) {
        let cols = self.cols;
        self.data
            .par_chunks_mut(cols)
            .enumerate()
            .for_each(|(i, row)| f(i, row));
    }

    /// Elementwise convex combination `w * self + (1 - w) * other`.
    ///
    /// This is the fusion rule shared by the textual and the full fusion
    /// steps; `w` must lie in `[0, 1]`.
    pub fn convex_combine(&self, other: &DistanceMatrix<S>, w: S) -> Result<DistanceMatrix<S>> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(AlignError::ShapeMismatch {
                left_rows: self.rows,
                left_cols: self.cols,
                right_rows: other.rows,
                right_cols: other.cols,
            });
        }
        let one_minus = S::one() - w;
        let data = self
            .data
            .par_iter()
            .zip(&other.data)
            .map(|(&a, &b)| w * a + one_minus * b)
            .collect();
        Ok(DistanceMatrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    /// Transposed copy (used by symmetry tests).
    pub fn transposed(&self) -> DistanceMatrix<S> {
        let mut out = DistanceMatrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.set(c, r, self.get(r, c));
            }
        }
        out
    }
}

/// Per-entity real vectors (name-semantic vectors, structural embeddings).
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix<S> {
    mat: Matrix<S>,
}

impl<S: Scalar> EmbeddingMatrix<S> {
    pub fn zeros(rows: usize, dim: usize) -> Self {
        EmbeddingMatrix {
            mat: Matrix::zeros(rows, dim),
        }
    }

    pub fn from_matrix(mat: Matrix<S>) -> Self {
        EmbeddingMatrix { mat }
    }

    pub fn from_vec(rows: usize, dim: usize, data: Vec<S>) -> Self {
        EmbeddingMatrix {
            mat: Matrix::from_vec(rows, dim, data),
        }
    }

    pub fn len(&self) -> usize {
        self.mat.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.mat.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.mat.cols()
    }

    pub fn row(&self, i: usize) -> &[S] {
        self.mat.row(i)
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [S] {
        self.mat.row_mut(i)
    }

    pub fn normalize_rows(&mut self) {
        self.mat.normalize_rows();
    }

    /// Rows selected by entity id, in list order.
    pub fn select_rows(&self, ids: &[EntityId]) -> EmbeddingMatrix<S> {
        let mut out = Matrix::zeros(ids.len(), self.dim());
        for (i, id) in ids.iter().enumerate() {
            out.row_mut(i).copy_from_slice(self.mat.row(id.idx()));
        }
        EmbeddingMatrix { mat: out }
    }
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"OAEMB\x00\x01\x00";

/// Write an embedding checkpoint: magic, `n`, `d` (little-endian u64), then
/// row-major f32 values.
pub fn write_checkpoint<S: Scalar>(w: &mut impl Write, emb: &EmbeddingMatrix<S>) -> Result<()> {
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&(emb.len() as u64).to_le_bytes())?;
    w.write_all(&(emb.dim() as u64).to_le_bytes())?;
    for i in 0..emb.len() {
        for &v in emb.row(i) {
            w.write_all(&(v.to_f64_lossy() as f32).to_le_bytes())?;
        }
    }
    Ok(())
}

/// Read an embedding checkpoint written by [`write_checkpoint`].
pub fn read_checkpoint<S: Scalar>(r: &mut impl Read) -> Result<EmbeddingMatrix<S>> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(AlignError::BadCheckpoint("magic bytes do not match".into()));
    }
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    let n = u64::from_le_bytes(buf) as usize;
    r.read_exact(&mut buf)?;
    let d = u64::from_le_bytes(buf) as usize;
    let count = n.checked_mul(d).ok_or_else(|| {
        AlignError::BadCheckpoint(format!("implausible shape {n}x{d}"))
    })?;
    let mut data = Vec::with_capacity(count);
    let mut fbuf = [0u8; 4];
    for _ in 0..count {
        r.read_exact(&mut fbuf)?;
        data.push(S::from_f64_lossy(f32::from_le_bytes(fbuf) as f64));
    }
    Ok(EmbeddingMatrix::from_vec(n, d, data))
}
