//! Small dense linear algebra: a column-major matrix and a Householder QR
//! that detects linearly dependent columns in their given order.

use std::fmt;

/// Dense column-major matrix.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    nrows: usize,
    ncols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            data: vec![0.0; nrows * ncols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from equally long columns.
    ///
    /// Panics if the columns differ in length.
    pub fn from_columns(columns: &[Vec<f64>]) -> Self {
        let ncols = columns.len();
        let nrows = columns.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(nrows * ncols);
        for c in columns {
            assert_eq!(c.len(), nrows, "ragged columns");
            data.extend_from_slice(c);
        }
        Self { nrows, ncols, data }
    }

    pub fn from_fn(nrows: usize, ncols: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(nrows, ncols);
        for j in 0..ncols {
            for i in 0..nrows {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    pub fn column_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    /// Keeps only the listed columns, in the listed order.
    pub fn select_columns(&self, cols: &[usize]) -> Self {
        let columns: Vec<Vec<f64>> = cols.iter().map(|&j| self.column(j).to_vec()).collect();
        if columns.is_empty() {
            return Self::zeros(self.nrows, 0);
        }
        Self::from_columns(&columns)
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.ncols, self.nrows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.ncols, rhs.nrows, "dimension mismatch");
        let mut out = Matrix::zeros(self.nrows, rhs.ncols);
        for j in 0..rhs.ncols {
            for k in 0..self.ncols {
                let b = rhs[(k, j)];
                if b == 0.0 {
                    continue;
                }
                let col = self.column(k);
                let dst = out.column_mut(j);
                for i in 0..col.len() {
                    dst[i] += col[i] * b;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.ncols, v.len(), "dimension mismatch");
        let mut out = vec![0.0; self.nrows];
        for (j, &b) in v.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.column(j)) {
                *o += a * b;
            }
        }
        out
    }

    /// `selfᵀ · v`
    pub fn tr_mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.nrows, v.len(), "dimension mismatch");
        (0..self.ncols)
            .map(|j| self.column(j).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn scale(&mut self, s: f64) {
        for x in &mut self.data {
            *x *= s;
        }
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.nrows && j < self.ncols);
        &self.data[j * self.nrows + i]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.nrows && j < self.ncols);
        &mut self.data[j * self.nrows + i]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{}", self.nrows, self.ncols)?;
        for i in 0..self.nrows {
            let row: Vec<String> = (0..self.ncols).map(|j| format!("{:.6e}", self[(i, j)])).collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

/// Relative threshold below which a column is treated as a linear
/// combination of the columns kept before it.
pub const RANK_TOL: f64 = 1e-9;

/// Householder QR of `A` processed column by column in the given order.
///
/// A column whose component orthogonal to the already-kept columns has norm
/// below `RANK_TOL` times its own norm is reported in `dropped` and takes no
/// part in the factorization, so the kept columns always form a full-rank
/// `R`.
#[derive(Debug, Clone)]
pub struct Qr {
    nrows: usize,
    reflectors: Vec<(Vec<f64>, f64)>,
    r: Matrix,
    kept: Vec<usize>,
    dropped: Vec<usize>,
}

impl Qr {
    pub fn new(a: &Matrix) -> Self {
        let n = a.nrows();
        let mut reflectors: Vec<(Vec<f64>, f64)> = Vec::new();
        let mut kept = Vec::new();
        let mut dropped = Vec::new();
        let mut r_cols: Vec<Vec<f64>> = Vec::new();

        for j in 0..a.ncols() {
            let mut col = a.column(j).to_vec();
            let orig_norm = norm2(&col);
            let k = reflectors.len();
            if orig_norm == 0.0 || !orig_norm.is_finite() || k >= n {
                dropped.push(j);
                continue;
            }
            for (idx, (v, beta)) in reflectors.iter().enumerate() {
                apply_reflector(v, *beta, &mut col[idx..]);
            }
            let tail_norm = norm2(&col[k..]);
            if tail_norm <= RANK_TOL * orig_norm {
                dropped.push(j);
                continue;
            }
            let alpha = if col[k] >= 0.0 { -tail_norm } else { tail_norm };
            let mut v = col[k..].to_vec();
            v[0] -= alpha;
            let vnorm2: f64 = v.iter().map(|x| x * x).sum();
            let beta = if vnorm2 == 0.0 { 0.0 } else { 2.0 / vnorm2 };
            let mut rcol = col[..k].to_vec();
            rcol.push(alpha);
            r_cols.push(rcol);
            reflectors.push((v, beta));
            kept.push(j);
        }

        let p = kept.len();
        let mut r = Matrix::zeros(p, p);
        for (j, rc) in r_cols.iter().enumerate() {
            for (i, &x) in rc.iter().enumerate() {
                r[(i, j)] = x;
            }
        }
        Self {
            nrows: n,
            reflectors,
            r,
            kept,
            dropped,
        }
    }

    /// Indices of the columns that entered the factorization.
    pub fn kept(&self) -> &[usize] {
        &self.kept
    }

    /// Indices of the columns found to be linearly dependent.
    pub fn dropped(&self) -> &[usize] {
        &self.dropped
    }

    pub fn is_full_rank(&self) -> bool {
        self.dropped.is_empty()
    }

    pub fn r(&self) -> &Matrix {
        &self.r
    }

    /// `Qᵀ y`, full length.
    pub fn qt_mul(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.nrows);
        let mut out = y.to_vec();
        for (idx, (v, beta)) in self.reflectors.iter().enumerate() {
            apply_reflector(v, *beta, &mut out[idx..]);
        }
        out
    }

    /// Least-squares coefficients for the kept columns.
    pub fn solve(&self, y: &[f64]) -> Vec<f64> {
        let qty = self.qt_mul(y);
        back_substitute(&self.r, &qty[..self.kept.len()])
    }

    /// `R⁻¹`, by back substitution against the identity.
    pub fn r_inverse(&self) -> Matrix {
        let p = self.kept.len();
        let mut inv = Matrix::zeros(p, p);
        for j in 0..p {
            let mut e = vec![0.0; p];
            e[j] = 1.0;
            let col = back_substitute(&self.r, &e);
            inv.column_mut(j).copy_from_slice(&col);
        }
        inv
    }

    /// `(AᵀA)⁻¹ = R⁻¹ R⁻ᵀ` over the kept columns.
    pub fn gram_inverse(&self) -> Matrix {
        let rinv = self.r_inverse();
        rinv.matmul(&rinv.transpose())
    }
}

fn norm2(x: &[f64]) -> f64 {
    // scaled to avoid overflow on large inputs
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    scale * x.iter().map(|v| (v / scale).powi(2)).sum::<f64>().sqrt()
}

fn apply_reflector(v: &[f64], beta: f64, x: &mut [f64]) {
    let dot: f64 = v.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
    let s = beta * dot;
    for (xi, vi) in x.iter_mut().zip(v) {
        *xi -= s * vi;
    }
}

fn back_substitute(r: &Matrix, b: &[f64]) -> Vec<f64> {
    let p = r.ncols();
    let mut x = vec![0.0; p];
    for i in (0..p).rev() {
        let mut acc = b[i];
        for j in i + 1..p {
            acc -= r[(i, j)] * x[j];
        }
        x[i] = acc / r[(i, i)];
    }
    x
}
