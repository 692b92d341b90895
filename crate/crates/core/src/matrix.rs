//! Row-major dense matrices and per-timestep sequence tensors.

use std::fmt;
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::solvers::SolverError;

/// A dense, row-major matrix of `f64`.
///
/// Public constructors reject non-finite entries. Arithmetic helpers do not
/// re-check finiteness; solvers that can diverge check their own iterates.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// Products with fewer multiply-adds than this use plain loops; packing in
/// the blocked kernel dominates below it.
const BLOCKED_GEMM_MIN_WORK: usize = 1 << 17;

/// `out += A·B` for strided views; `dims` is `(m, k, n)` and each operand is
/// `(data, row_stride, col_stride)`. `out` is row-major with `n` columns.
fn gemm(dims: (usize, usize, usize), a: (&[f64], usize, usize), b: (&[f64], usize, usize), out: &mut [f64]) {
    let (m, k, n) = dims;
    if m == 0 || n == 0 || k == 0 {
        return;
    }
    if m * k * n < BLOCKED_GEMM_MIN_WORK {
        small_gemm(dims, a, b, out);
        return;
    }
    assert!(a.0.len() > (m - 1) * a.1 + (k - 1) * a.2 && b.0.len() > (k - 1) * b.1 + (n - 1) * b.2);
    assert!(out.len() >= m * n);
    // SAFETY: the asserts above bound every strided index used by dgemm.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.0.as_ptr(),
            a.1 as isize,
            a.2 as isize,
            b.0.as_ptr(),
            b.1 as isize,
            b.2 as isize,
            1.0,
            out.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

const NARROW: usize = 4;

/// Plain-loop version of [`gemm`].
fn small_gemm(dims: (usize, usize, usize), a: (&[f64], usize, usize), b: (&[f64], usize, usize), out: &mut [f64]) {
    let (m, k, n) = dims;
    if b.2 == 1 && n <= NARROW {
        // narrow outputs: keep the row in registers
        for i in 0..m {
            let mut acc = [0.0; NARROW];
            let acc = &mut acc[..n];
            acc.copy_from_slice(&out[i * n..(i + 1) * n]);
            for kk in 0..k {
                let av = a.0[i * a.1 + kk * a.2];
                if av == 0.0 {
                    continue;
                }
                for (o, &bv) in acc.iter_mut().zip(&b.0[kk * b.1..kk * b.1 + n]) {
                    *o += av * bv;
                }
            }
            out[i * n..(i + 1) * n].copy_from_slice(acc);
        }
        return;
    }
    for i in 0..m {
        let o_row = &mut out[i * n..(i + 1) * n];
        for kk in 0..k {
            let av = a.0[i * a.1 + kk * a.2];
            if av == 0.0 {
                continue;
            }
            if b.2 == 1 {
                for (o, &bv) in o_row.iter_mut().zip(&b.0[kk * b.1..kk * b.1 + n]) {
                    *o += av * bv;
                }
            } else {
                for (j, o) in o_row.iter_mut().enumerate() {
                    *o += av * b.0[kk * b.1 + j * b.2];
                }
            }
        }
    }
}

impl DenseMatrix {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, SolverError> {
        if data.len() != rows * cols {
            return Err(SolverError::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(SolverError::NonFiniteInput(format!(
                "entry ({}, {})",
                pos / cols.max(1),
                pos % cols.max(1)
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, SolverError> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(SolverError::DimensionMismatch("ragged rows".into()));
        }
        Self::from_vec(rows.len(), cols, rows.concat())
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// One row per sample, all rows equal to `v`.
    pub fn broadcast_row(rows: usize, v: &[f64]) -> Self {
        let mut data = Vec::with_capacity(rows * v.len());
        for _ in 0..rows {
            data.extend_from_slice(v);
        }
        Self {
            rows,
            cols: v.len(),
            data,
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// `self * rhs`.
    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, rhs.cols);
        gemm(
            (self.rows, self.cols, rhs.cols),
            (&self.data, self.cols, 1),
            (&rhs.data, rhs.cols, 1),
            &mut out.data,
        );
        out
    }

    /// `selfᵀ * rhs` without forming the transpose.
    pub fn t_matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.rows, rhs.rows, "t_matmul shape mismatch");
        let mut out = Self::zeros(self.cols, rhs.cols);
        gemm(
            (self.cols, self.rows, rhs.cols),
            (&self.data, 1, self.cols),
            (&rhs.data, rhs.cols, 1),
            &mut out.data,
        );
        out
    }

    /// `self * rhsᵀ` without forming the transpose.
    pub fn matmul_t(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.cols, "matmul_t shape mismatch");
        if self.cols >= 8 {
            return Self::from_fn(self.rows, rhs.rows, |i, j| dot(self.row(i), rhs.row(j)));
        }
        let mut out = Self::zeros(self.rows, rhs.rows);
        let rt = rhs.transpose();
        gemm(
            (self.rows, self.cols, rhs.rows),
            (&self.data, self.cols, 1),
            (&rt.data, rt.cols, 1),
            &mut out.data,
        );
        out
    }

    pub fn add(&self, rhs: &Self) -> Self {
        self.zip_map(rhs, |a, b| a + b)
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        self.zip_map(rhs, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| v * s)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, rhs: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.shape(), rhs.shape(), "elementwise shape mismatch");
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn add_assign(&mut self, rhs: &Self) {
        assert_eq!(self.shape(), rhs.shape(), "elementwise shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }

    /// `self += s * rhs`.
    pub fn axpy(&mut self, s: f64, rhs: &Self) {
        assert_eq!(self.shape(), rhs.shape(), "elementwise shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += s * b;
        }
    }

    /// Adds `v` to every row.
    pub fn add_row_vector(&mut self, v: &[f64]) {
        assert_eq!(self.cols, v.len(), "row vector length mismatch");
        for row in self.data.chunks_exact_mut(self.cols.max(1)) {
            for (a, b) in row.iter_mut().zip(v) {
                *a += b;
            }
        }
    }

    /// Adds `v[r]` to every entry of row `r`.
    pub fn add_column_vector(&mut self, v: &[f64]) {
        assert_eq!(self.rows, v.len(), "column vector length mismatch");
        for (row, b) in self.data.chunks_exact_mut(self.cols.max(1)).zip(v) {
            for a in row {
                *a += b;
            }
        }
    }

    /// Row sums, i.e. `self 1`.
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i).iter().sum()).collect()
    }

    /// Column sums, i.e. `selfᵀ 1`.
    pub fn column_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (o, v) in out.iter_mut().zip(self.row(i)) {
                *o += v;
            }
        }
        out
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn clamp_nonneg(&mut self) {
        for v in &mut self.data {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
    }

    pub fn min_entry(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Horizontal concatenation `[a, b, ...]`; all blocks share a row count.
    pub fn hstack(blocks: &[&Self]) -> Self {
        let rows = blocks.first().map_or(0, |b| b.rows);
        assert!(blocks.iter().all(|b| b.rows == rows), "hstack row mismatch");
        let cols = blocks.iter().map(|b| b.cols).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for b in blocks {
                data.extend_from_slice(b.row(i));
            }
        }
        Self { rows, cols, data }
    }

    /// Vertical concatenation; all blocks share a column count.
    pub fn vstack(blocks: &[&Self]) -> Self {
        let cols = blocks.first().map_or(0, |b| b.cols);
        assert!(blocks.iter().all(|b| b.cols == cols), "vstack column mismatch");
        let rows = blocks.iter().map(|b| b.rows).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for b in blocks {
            data.extend_from_slice(&b.data);
        }
        Self { rows, cols, data }
    }

    /// Rows `start..end` as a new matrix.
    pub fn row_block(&self, start: usize, end: usize) -> Self {
        Self {
            rows: end - start,
            cols: self.cols,
            data: self.data[start * self.cols..end * self.cols].to_vec(),
        }
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

// Serialized as a list of rows.
impl Serialize for DenseMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for DenseMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        DenseMatrix::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// A sequence tensor `m × features × T`, stored as `T` time slices of shape
/// `m × features`.
#[derive(Clone, Debug, PartialEq)]
pub struct SeqTensor {
    samples: usize,
    features: usize,
    steps: Vec<DenseMatrix>,
}

impl SeqTensor {
    pub fn from_steps(steps: Vec<DenseMatrix>) -> Result<Self, SolverError> {
        let (samples, features) = steps.first().map_or((0, 0), DenseMatrix::shape);
        if steps.iter().any(|s| s.shape() != (samples, features)) {
            return Err(SolverError::DimensionMismatch(
                "time slices differ in shape".into(),
            ));
        }
        Ok(Self {
            samples,
            features,
            steps,
        })
    }

    pub fn zeros(samples: usize, features: usize, len: usize) -> Self {
        Self {
            samples,
            features,
            steps: vec![DenseMatrix::zeros(samples, features); len],
        }
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn features(&self) -> usize {
        self.features
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn steps(&self) -> &[DenseMatrix] {
        &self.steps
    }

    pub fn step(&self, t: usize) -> &DenseMatrix {
        &self.steps[t]
    }

    pub fn step_mut(&mut self, t: usize) -> &mut DenseMatrix {
        &mut self.steps[t]
    }

    #[inline]
    pub fn get(&self, sample: usize, feature: usize, t: usize) -> f64 {
        self.steps[t][(sample, feature)]
    }

    #[inline]
    pub fn set(&mut self, sample: usize, feature: usize, t: usize, v: f64) {
        self.steps[t][(sample, feature)] = v;
    }

    /// Keeps only the listed samples, in order.
    pub fn select_samples(&self, idx: &[usize]) -> Self {
        Self {
            samples: idx.len(),
            features: self.features,
            steps: self.steps.iter().map(|s| s.select_rows(idx)).collect(),
        }
    }

    /// Nested `[sample][feature][t]` layout.
    pub fn to_nested(&self) -> Vec<Vec<Vec<f64>>> {
        (0..self.samples)
            .map(|s| {
                (0..self.features)
                    .map(|f| (0..self.len()).map(|t| self.get(s, f, t)).collect())
                    .collect()
            })
            .collect()
    }
}
