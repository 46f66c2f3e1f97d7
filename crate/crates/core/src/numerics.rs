//! Dense linear algebra used throughout the crate.
//!
//! Everything here is small and self-contained: row-major matrices, a cyclic
//! Jacobi eigensolver for symmetric matrices, Gram–Schmidt orthonormalization,
//! and LU determinants. Matrices in this crate stay below a few hundred rows,
//! which is the regime these routines are written for.

use std::fmt;
use std::ops::Index;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tolerance;

/// A dense, row-major matrix of finite reals.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMatrix", into = "RawMatrix")]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl TryFrom<RawMatrix> for Matrix {
    type Error = Error;
    fn try_from(raw: RawMatrix) -> Result<Self> {
        Matrix::new(raw.rows, raw.cols, raw.data)
    }
}

impl From<Matrix> for RawMatrix {
    fn from(m: Matrix) -> Self {
        RawMatrix { rows: m.rows, cols: m.cols, data: m.data }
    }
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::invalid(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite entry at ({}, {})",
                pos / cols.max(1),
                pos % cols.max(1)
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::invalid(format!("row {i} has {} entries, expected {cols}", r.len())));
            }
            data.extend_from_slice(r);
        }
        Matrix::new(rows.len(), cols, data)
    }

    /// Builds a matrix from `f(i, j)`. Panics if `f` produces a non-finite value.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix::new(rows, cols, data).expect("from_fn produced a non-finite entry")
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        Matrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        Matrix::from_fn(n, n, |i, j| if i == j { values[i] } else { 0.0 })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::invalid(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = vec![0.0; self.rows * other.cols];
        for i in 0..self.rows {
            let dst = &mut out[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (d, &b) in dst.iter_mut().zip(other.row(k)) {
                    *d += a * b;
                }
            }
        }
        Matrix::new(self.rows, other.cols, out)
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        if self.shape() != other.shape() {
            return Err(Error::invalid("shape mismatch in addition"));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Matrix::new(self.rows, self.cols, data)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        if self.shape() != other.shape() {
            return Err(Error::invalid("shape mismatch in subtraction"));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Matrix::new(self.rows, self.cols, data)
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix::from_fn(self.rows, self.cols, |i, j| s * self[(i, j)])
    }

    /// Largest absolute entry; zero for an empty matrix.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `max |self - other|`, or infinity when shapes differ.
    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        if self.shape() != other.shape() {
            return f64::INFINITY;
        }
        self.data.iter().zip(&other.data).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }

    /// `max |K - K^T|`; infinity for non-square input.
    pub fn asymmetry(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut worst = 0.0_f64;
        for i in 0..self.rows {
            for j in i + 1..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    /// Principal submatrix on `idx` (rows and columns).
    pub fn principal(&self, idx: &[usize]) -> Matrix {
        Matrix::from_fn(idx.len(), idx.len(), |a, b| self[(idx[a], idx[b])])
    }

    /// Rows selected by `idx`, all columns.
    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix { rows: idx.len(), cols: self.cols, data }
    }

    /// Columns selected by `idx`, all rows.
    pub fn select_cols(&self, idx: &[usize]) -> Matrix {
        Matrix::from_fn(self.rows, idx.len(), |i, b| self[(i, idx[b])])
    }

    pub(crate) fn from_parts_unchecked(rows: usize, cols: usize, data: Vec<f64>) -> Matrix {
        debug_assert_eq!(rows * cols, data.len());
        Matrix { rows, cols, data }
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `L = A A^T`.
pub fn gram(a: &Matrix) -> Result<Matrix> {
    if a.rows == 0 || a.cols == 0 {
        return Err(Error::invalid("gram of an empty matrix"));
    }
    let n = a.rows;
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = dot(a.row(i), a.row(j));
            data[i * n + j] = v;
            data[j * n + i] = v;
        }
    }
    Matrix::new(n, n, data)
}

/// Orthonormal basis for the column space of `a`, column by column.
///
/// Uses modified Gram–Schmidt with one reorthogonalization pass, which keeps
/// `Q^T Q` at machine precision for the well-conditioned inputs this crate
/// feeds it. A column whose residual falls below `QR_RANK * |A|_F` is
/// reported as rank deficient.
pub fn qr_orthonormalize(a: &Matrix) -> Result<Matrix> {
    let (n, d) = a.shape();
    if d == 0 || n == 0 {
        return Err(Error::invalid("cannot orthonormalize an empty matrix"));
    }
    if n < d {
        return Err(Error::invalid(format!("{n}x{d} matrix has more columns than rows")));
    }
    let scale = a.frobenius();
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(d);
    for j in 0..d {
        let mut v = a.column(j);
        for _pass in 0..2 {
            for qk in &q {
                let r = dot(qk, &v);
                for (vi, qi) in v.iter_mut().zip(qk) {
                    *vi -= r * qi;
                }
            }
        }
        let nv = norm(&v);
        if nv <= tolerance::QR_RANK * scale || nv == 0.0 {
            return Err(Error::RankDeficient { column: j });
        }
        v.iter_mut().for_each(|x| *x /= nv);
        q.push(v);
    }
    Ok(Matrix::from_fn(n, d, |i, j| q[j][i]))
}

/// Eigenvalues (descending) and matching orthonormal eigenvectors (columns).
///
/// A decomposition may be *thin*: fewer columns than rows, with the omitted
/// eigenvalues understood to be zero.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Matrix,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvectors.rows()
    }

    /// `V diag(f(λ)) V^T`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> Matrix {
        let n = self.dim();
        let v = &self.eigenvectors;
        let w: Vec<f64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let s: f64 = (0..w.len()).map(|k| v[(i, k)] * w[k] * v[(j, k)]).sum();
                data[i * n + j] = s;
                data[j * n + i] = s;
            }
        }
        Matrix::from_parts_unchecked(n, n, data)
    }

    pub fn reconstruct(&self) -> Matrix {
        self.reconstruct_with(|l| l)
    }

    /// Sorts descending (stable) and fixes eigenvector signs so each column's
    /// largest-magnitude entry is positive.
    fn canonicalize(mut values: Vec<f64>, vectors: Vec<Vec<f64>>) -> Self {
        let n = vectors.first().map_or(0, Vec::len);
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
        let mut cols = Vec::with_capacity(order.len());
        for &k in &order {
            let mut v = vectors[k].clone();
            let mut best = 0;
            for i in 1..v.len() {
                if v[i].abs() > v[best].abs() {
                    best = i;
                }
            }
            if v.get(best).is_some_and(|x| *x < 0.0) {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            cols.push(v);
        }
        values = order.iter().map(|&k| values[k]).collect();
        let r = cols.len();
        EigenDecomposition {
            eigenvalues: values,
            eigenvectors: Matrix::from_fn(n, r, |i, j| cols[j][i]),
        }
    }
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
pub fn sym_eig(k: &Matrix) -> Result<EigenDecomposition> {
    if !k.is_square() {
        return Err(Error::invalid(format!("eigendecomposition of non-square {}x{}", k.rows, k.cols)));
    }
    if k.asymmetry() > tolerance::SYMMETRY {
        return Err(Error::invalid(format!("matrix is not symmetric (asymmetry {:e})", k.asymmetry())));
    }
    let n = k.rows;
    // Work on the exactly-symmetrized copy.
    let mut a: Vec<f64> = (0..n * n).map(|p| 0.5 * (k.data[p] + k.data[(p % n) * n + p / n])).collect();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let threshold = tolerance::JACOBI_OFF_DIAGONAL * k.max_abs();

    let off_max = |a: &[f64]| {
        let mut m = 0.0_f64;
        for i in 0..n {
            for j in i + 1..n {
                m = m.max(a[i * n + j].abs());
            }
        }
        m
    };

    let mut sweeps = 0;
    while off_max(&a) > threshold {
        if sweeps == tolerance::JACOBI_MAX_SWEEPS {
            return Err(Error::invalid("Jacobi iteration did not converge"));
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() <= threshold * 1e-3 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let tau = (aqq - app) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let t = if tau == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // A <- J^T A J on rows/cols p, q.
                for r in 0..n {
                    let arp = a[r * n + p];
                    let arq = a[r * n + q];
                    a[r * n + p] = c * arp - s * arq;
                    a[r * n + q] = s * arp + c * arq;
                }
                for r in 0..n {
                    let apr = a[p * n + r];
                    let aqr = a[q * n + r];
                    a[p * n + r] = c * apr - s * aqr;
                    a[q * n + r] = s * apr + c * aqr;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for r in 0..n {
                    let vrp = v[r * n + p];
                    let vrq = v[r * n + q];
                    v[r * n + p] = c * vrp - s * vrq;
                    v[r * n + q] = s * vrp + c * vrq;
                }
            }
        }
    }

    let values: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    let vectors: Vec<Vec<f64>> = (0..n).map(|j| (0..n).map(|i| v[i * n + j]).collect()).collect();
    Ok(EigenDecomposition::canonicalize(values, vectors))
}

/// Eigendecomposition of `A A^T` computed from the small `A^T A` instead.
///
/// Returns a thin decomposition holding only eigenvalues above `RANK`; this is
/// exact for Gram kernels and costs `O(n d^2 + d^3)` instead of `O(n^3)`.
pub fn gram_eig(a: &Matrix) -> Result<EigenDecomposition> {
    let (n, d) = a.shape();
    if n == 0 || d == 0 {
        return Err(Error::invalid("gram of an empty matrix"));
    }
    let dual = gram(&a.transpose())?;
    let small = sym_eig(&dual)?;
    let mut values = Vec::new();
    let mut vectors: Vec<Vec<f64>> = Vec::new();
    for (k, &lambda) in small.eigenvalues.iter().enumerate() {
        if lambda <= tolerance::RANK {
            continue;
        }
        let w = small.eigenvectors.column(k);
        let s = lambda.sqrt();
        let mut u: Vec<f64> = (0..n).map(|i| dot(a.row(i), &w) / s).collect();
        // One refinement step keeps the columns orthonormal to working precision.
        for prev in &vectors {
            let r = dot(prev, &u);
            for (ui, pi) in u.iter_mut().zip(prev.iter()) {
                *ui -= r * pi;
            }
        }
        let nu = norm(&u);
        u.iter_mut().for_each(|x| *x /= nu);
        values.push(lambda);
        vectors.push(u);
    }
    if vectors.is_empty() {
        return Ok(EigenDecomposition { eigenvalues: vec![], eigenvectors: Matrix::zeros(n, 0) });
    }
    Ok(EigenDecomposition::canonicalize(values, vectors))
}

/// Determinant by LU with partial pivoting.
pub fn det(m: &Matrix) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::invalid(format!("determinant of non-square {}x{}", m.rows, m.cols)));
    }
    Ok(det_unchecked(m.rows, m.data.clone()))
}

pub(crate) fn det_unchecked(n: usize, mut a: Vec<f64>) -> f64 {
    let mut sign = 1.0;
    let mut acc = 1.0;
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if a[r * n + col].abs() > a[piv * n + col].abs() {
                piv = r;
            }
        }
        let p = a[piv * n + col];
        if p.abs() < tolerance::DET_UNDERFLOW {
            return 0.0;
        }
        if piv != col {
            for c in 0..n {
                a.swap(col * n + c, piv * n + c);
            }
            sign = -sign;
        }
        acc *= p;
        for r in col + 1..n {
            let f = a[r * n + col] / p;
            if f == 0.0 {
                continue;
            }
            for c in col + 1..n {
                a[r * n + c] -= f * a[col * n + c];
            }
        }
    }
    sign * acc
}

/// Determinant of the principal minor of `m` on `idx`. The empty minor is 1.
pub fn principal_det(m: &Matrix, idx: &[usize]) -> f64 {
    let k = idx.len();
    let mut data = Vec::with_capacity(k * k);
    for &i in idx {
        for &j in idx {
            data.push(m[(i, j)]);
        }
    }
    det_unchecked(k, data)
}

/// Moore–Penrose pseudo-inverse of a symmetric matrix, zeroing eigenvalues
/// below `PINV`.
pub fn pinv_sym(m: &Matrix) -> Result<Matrix> {
    let eig = sym_eig(m)?;
    Ok(eig.reconstruct_with(|l| if l.abs() < tolerance::PINV { 0.0 } else { 1.0 / l }))
}
