//! Dense real linear algebra sized for desk-scale oracles.
//!
//! Everything here is exact-arithmetic style (elimination, augmented systems)
//! rather than iterative, except [`spectral_norm`], which uses power iteration
//! on `AᵀA`.

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Shared numerical tolerances. Oracle comparisons elsewhere refer to these by name.
pub mod tol {
    /// Pivot magnitude below which elimination reports a singular matrix.
    pub const PIVOT: f64 = 1e-12;
    /// Row-sum tolerance for stochastic matrices and policy tables.
    pub const STOCHASTIC: f64 = 1e-10;
    /// Sum tolerance for probability vectors.
    pub const PROB_SUM: f64 = 1e-12;
    /// Relative residual bound for [`super::solve_linear`].
    pub const SOLVE_RESIDUAL: f64 = 1e-9;
    /// Residual bound on `dᵀP = dᵀ` for stationary distributions.
    pub const STATIONARY_RESIDUAL: f64 = 1e-10;
    /// Relative convergence tolerance of the power iteration.
    pub const SPECTRAL_REL: f64 = 1e-10;
    /// Iteration cap of the power iteration.
    pub const SPECTRAL_MAX_ITER: usize = 100_000;
    /// Relative pivot threshold for numerical rank.
    pub const RANK: f64 = 1e-10;
    /// Fixed-point residual bound for `Cω* + b = 0`.
    pub const FIXED_POINT: f64 = 1e-8;
    /// Consistency tolerance between value tables.
    pub const VALUE_CONSISTENCY: f64 = 1e-9;
    /// Row-sum tolerance for consensus weight matrices.
    pub const WEIGHT_ROW_SUM: f64 = 1e-12;
}

/// Row-major dense matrix.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
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

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Builds a matrix from row-major data, rejecting wrong lengths and non-finite entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                actual: data.len(),
            });
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                what: "matrix entries",
                agent: None,
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from a slice of equally sized rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    actual: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::from_vec(rows.len(), cols, data)
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

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
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

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                actual: other.rows,
            });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let src = other.row(k);
                for (o, &b) in out.row_mut(i).iter_mut().zip(src) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `A x`
    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                actual: x.len(),
            });
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), x)).collect())
    }

    /// `xᵀ A`
    pub fn vec_mul(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.rows {
            return Err(Error::DimensionMismatch {
                expected: self.rows,
                actual: x.len(),
            });
        }
        let mut out = vec![0.0; self.cols];
        for (i, &xi) in x.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += xi * a;
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| c * x).collect(),
        }
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch {
                expected: self.rows * self.cols,
                actual: other.rows * other.cols,
            });
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// Scales column `j` by `d[j]`, i.e. `A · diag(d)`.
    pub fn mul_diag_right(&self, d: &[f64]) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| self[(i, j)] * d[j])
    }

    /// Scales row `i` by `d[i]`, i.e. `diag(d) · A`.
    pub fn mul_diag_left(&self, d: &[f64]) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| d[i] * self[(i, j)])
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.is_square()
            && (0..self.rows).all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }

    /// Numerical rank via Gaussian elimination with full pivoting.
    pub fn rank(&self) -> usize {
        let mut a = self.clone();
        let scale = a.max_abs();
        if scale == 0.0 {
            return 0;
        }
        let threshold = tol::RANK * scale;
        let (m, n) = (a.rows, a.cols);
        let mut rank = 0;
        for step in 0..m.min(n) {
            let (mut pr, mut pc, mut best) = (step, step, 0.0);
            for i in step..m {
                for j in step..n {
                    let v = a[(i, j)].abs();
                    if v > best {
                        best = v;
                        pr = i;
                        pc = j;
                    }
                }
            }
            if best <= threshold {
                break;
            }
            a.swap_rows(step, pr);
            for i in 0..m {
                a.data.swap(i * n + step, i * n + pc);
            }
            for i in step + 1..m {
                let factor = a[(i, step)] / a[(step, step)];
                if factor != 0.0 {
                    for j in step..n {
                        let v = a[(step, j)];
                        a[(i, j)] -= factor * v;
                    }
                }
            }
            rank += 1;
        }
        rank
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a != b {
            for j in 0..self.cols {
                self.data.swap(a * self.cols + j, b * self.cols + j);
            }
        }
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
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

/// Nonnegative vector summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidPolicy("empty probability vector".into()));
        }
        if entries.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidPolicy(format!(
                "negative or non-finite probability in {entries:?}"
            )));
        }
        let sum: f64 = entries.iter().sum();
        if (sum - 1.0).abs() > tol::PROB_SUM {
            return Err(Error::InvalidPolicy(format!(
                "probabilities sum to {sum}, not 1"
            )));
        }
        Ok(Self(entries))
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl std::ops::Deref for ProbVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// LU factorisation with partial pivoting, reusable across right-hand sides.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: DenseMatrix,
    perm: Vec<usize>,
}

impl Lu {
    pub fn new(a: &DenseMatrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch {
                expected: a.rows,
                actual: a.cols,
            });
        }
        let n = a.rows;
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pivot) = (k..n)
                .map(|i| (i, lu[(i, k)].abs()))
                .fold(
                    (k, -1.0),
                    |best, cur| if cur.1 > best.1 { cur } else { best },
                );
            if pivot < tol::PIVOT {
                return Err(Error::SingularMatrix { pivot });
            }
            lu.swap_rows(k, p);
            perm.swap(k, p);
            let diag = lu[(k, k)];
            for i in k + 1..n {
                let factor = lu[(i, k)] / diag;
                lu[(i, k)] = factor;
                if factor != 0.0 {
                    for j in k + 1..n {
                        let v = lu[(k, j)];
                        lu[(i, j)] -= factor * v;
                    }
                }
            }
        }
        Ok(Self { lu, perm })
    }

    fn substitute(&self, b: &[f64]) -> Vec<f64> {
        let n = self.lu.rows;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s: f64 = (0..i).map(|j| self.lu[(i, j)] * x[j]).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| self.lu[(i, j)] * x[j]).sum();
            x[i] = (x[i] - s) / self.lu[(i, i)];
        }
        x
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.lu.rows {
            return Err(Error::DimensionMismatch {
                expected: self.lu.rows,
                actual: b.len(),
            });
        }
        Ok(self.substitute(b))
    }
}

/// Solves `A x = b` by partial-pivot elimination plus one refinement sweep.
pub fn solve_linear(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let lu = Lu::new(a)?;
    let mut x = lu.solve(b)?;
    let ax = a.mul_vec(&x)?;
    let residual: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let correction = lu.solve(&residual)?;
    for (xi, ci) in x.iter_mut().zip(&correction) {
        *xi += ci;
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularMatrix { pivot: 0.0 });
    }
    Ok(x)
}

/// `xᵀ A = bᵀ`, i.e. `Aᵀ x = b`.
pub fn solve_left(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    solve_linear(&a.transpose(), b)
}

pub fn inverse(a: &DenseMatrix) -> Result<DenseMatrix> {
    let lu = Lu::new(a)?;
    let n = a.rows;
    let mut inv = DenseMatrix::zeros(n, n);
    let mut unit = vec![0.0; n];
    for j in 0..n {
        unit.iter_mut().for_each(|u| *u = 0.0);
        unit[j] = 1.0;
        let col = lu.solve(&unit)?;
        for i in 0..n {
            inv[(i, j)] = col[i];
        }
    }
    Ok(inv)
}

/// Checks that `p` is row-stochastic within [`tol::STOCHASTIC`].
pub fn check_row_stochastic(p: &DenseMatrix) -> Result<()> {
    for i in 0..p.rows {
        let row = p.row(i);
        if let Some(&bad) = row
            .iter()
            .find(|&&x| x < -tol::STOCHASTIC || !x.is_finite())
        {
            return Err(Error::NotStochastic(format!("row {i} has entry {bad}")));
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > tol::STOCHASTIC {
            return Err(Error::NotStochastic(format!("row {i} sums to {sum}")));
        }
    }
    Ok(())
}

/// Stationary distribution of a row-stochastic matrix.
///
/// Solves `dᵀ(P − I) = 0` with the last equation replaced by `Σd = 1`; a
/// singular augmented system means the chain has no unique stationary law.
pub fn stationary_distribution(p: &DenseMatrix) -> Result<ProbVector> {
    if !p.is_square() {
        return Err(Error::NotStochastic("matrix is not square".into()));
    }
    check_row_stochastic(p)?;
    let n = p.rows;
    // Row j of the system is column j of (P − I).
    let mut a = DenseMatrix::from_fn(n, n, |j, i| p[(i, j)] - if i == j { 1.0 } else { 0.0 });
    a.row_mut(n - 1).iter_mut().for_each(|x| *x = 1.0);
    let mut rhs = vec![0.0; n];
    rhs[n - 1] = 1.0;
    let d = match solve_linear(&a, &rhs) {
        Ok(d) => d,
        Err(Error::SingularMatrix { .. }) => return Err(Error::NoUniqueStationary),
        Err(e) => return Err(e),
    };
    if d.iter().any(|&x| x < -tol::STATIONARY_RESIDUAL) {
        return Err(Error::NoUniqueStationary);
    }
    let clipped: Vec<f64> = d.iter().map(|&x| x.max(0.0)).collect();
    let sum: f64 = clipped.iter().sum();
    let d: Vec<f64> = clipped.iter().map(|x| x / sum).collect();
    let dp = p.vec_mul(&d)?;
    let residual = d
        .iter()
        .zip(&dp)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    if residual > tol::STATIONARY_RESIDUAL {
        return Err(Error::NoUniqueStationary);
    }
    ProbVector::new(d)
}

/// Largest singular value, by power iteration on `AᵀA`.
pub fn spectral_norm(a: &DenseMatrix) -> Result<f64> {
    if a.data.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite {
            what: "spectral_norm input",
            agent: None,
        });
    }
    let n = a.cols;
    if n == 0 || a.max_abs() == 0.0 {
        return Ok(0.0);
    }
    let ata = a.transpose().matmul(a)?;
    // Quasi-random start so that structured matrices (e.g. centring projections)
    // do not annihilate it.
    let mut v: Vec<f64> = (0..n)
        .map(|i| ((i as f64 + 1.0) * 0.754_877_666_246_692_7).fract() + 0.25)
        .collect();
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut estimate = 0.0;
    for iter in 0..tol::SPECTRAL_MAX_ITER {
        let w = ata.mul_vec(&v)?;
        let nw = norm2(&w);
        if nw == 0.0 {
            return Ok(0.0);
        }
        let next = dot(&v, &w);
        v = w.into_iter().map(|x| x / nw).collect();
        if iter > 0 && (next - estimate).abs() <= tol::SPECTRAL_REL * next.abs() {
            return Ok(next.max(0.0).sqrt());
        }
        estimate = next;
    }
    Err(Error::NoConvergence {
        iterations: tol::SPECTRAL_MAX_ITER,
    })
}

/// True iff the symmetric matrix `s` is negative definite (Cholesky of `−s`).
pub fn is_negative_definite(s: &DenseMatrix) -> bool {
    if !s.is_square() {
        return false;
    }
    let n = s.rows;
    let mut l = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut sum = -s[(i, j)];
            for k in 0..j {
                sum -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if !(sum > 0.0) {
                    return false;
                }
                l[(i, i)] = sum.sqrt();
            } else {
                l[(i, j)] = sum / l[(j, j)];
            }
        }
    }
    true
}
