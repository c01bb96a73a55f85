//! Small dense row-major matrices with pivoted LU, Cholesky and a cyclic
//! Jacobi eigenvalue solver. Sizes here never exceed a few dozen rows.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from row-major data.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                what: "matrix data".into(),
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let n = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n * c);
        for r in rows {
            if r.len() != c {
                return Err(Error::DimensionMismatch {
                    what: "matrix row".into(),
                    expected: c,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self { rows: n, cols: c, data })
    }

    pub fn diagonal(values: &[T]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
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

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn diag(&self) -> Vec<T> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| v * s).collect(),
        }
    }

    /// `self += s * other`
    pub fn add_scaled(&mut self, s: T, other: &Self) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + s * b;
        }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(
            self.cols, other.rows,
            "matmul: {}x{} * {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                let orow = other.row(k);
                let base = i * other.cols;
                for (j, &b) in orow.iter().enumerate() {
                    out.data[base + j] = out.data[base + j] + a * b;
                }
            }
        }
        out
    }

    /// `selfᵀ · other`
    pub fn tr_matmul(&self, other: &Self) -> Self {
        assert_eq!(self.rows, other.rows);
        let mut out = Self::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            let arow = self.row(k);
            let brow = other.row(k);
            for (i, &a) in arow.iter().enumerate() {
                if a == T::zero() {
                    continue;
                }
                let base = i * other.cols;
                for (j, &b) in brow.iter().enumerate() {
                    out.data[base + j] = out.data[base + j] + a * b;
                }
            }
        }
        out
    }

    pub fn mat_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    /// `selfᵀ · v`
    pub fn tr_mat_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.rows, v.len());
        let mut out = vec![T::zero(); self.cols];
        for (i, &vi) in v.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o = *o + a * vi;
            }
        }
        out
    }

    pub fn trace(&self) -> T {
        self.diag().into_iter().sum()
    }

    /// `tr(self · other)` without forming the product.
    pub fn trace_of_product(&self, other: &Self) -> T {
        assert_eq!(self.cols, other.rows);
        assert_eq!(self.rows, other.cols);
        let mut acc = T::zero();
        for i in 0..self.rows {
            for k in 0..self.cols {
                acc = acc + self[(i, k)] * other[(k, i)];
            }
        }
        acc
    }

    pub fn submatrix(&self, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> Self {
        Self::from_fn(rows.len(), cols.len(), |i, j| self[(rows.start + i, cols.start + j)])
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }

    pub fn symmetrize(&self) -> Self {
        let half = T::lit(0.5);
        Self::from_fn(self.rows, self.cols, |i, j| (self[(i, j)] + self[(j, i)]) * half)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn lu(&self) -> Result<Lu<T>> {
        Lu::new(self)
    }

    pub fn inverse(&self) -> Result<Self> {
        Ok(self.lu()?.inverse())
    }

    pub fn determinant(&self) -> Result<T> {
        match self.lu() {
            Ok(lu) => Ok(lu.determinant()),
            Err(Error::SingularMatrix) => Ok(T::zero()),
            Err(e) => Err(e),
        }
    }

    /// Numerical rank from the eigenvalues of `selfᵀ self`.
    pub fn rank(&self) -> usize {
        let gram = self.tr_matmul(self);
        let eig = symmetric_eigenvalues(&gram);
        let top = eig.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        if top == T::zero() {
            return 0;
        }
        let cutoff = top * T::epsilon() * T::lit(1e3) * T::from_usize(gram.rows()).unwrap();
        eig.iter().filter(|v| v.abs() > cutoff).count()
    }
}

impl<T: Real> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T: Real> IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl<T: Real> Add for &Matrix<T> {
    type Output = Matrix<T>;
    fn add(self, rhs: Self) -> Matrix<T> {
        let mut out = self.clone();
        out.add_scaled(T::one(), rhs);
        out
    }
}

impl<T: Real> Sub for &Matrix<T> {
    type Output = Matrix<T>;
    fn sub(self, rhs: Self) -> Matrix<T> {
        let mut out = self.clone();
        out.add_scaled(-T::one(), rhs);
        out
    }
}

impl<T: Real> Mul for &Matrix<T> {
    type Output = Matrix<T>;
    fn mul(self, rhs: Self) -> Matrix<T> {
        self.matmul(rhs)
    }
}

impl<T: fmt::Debug> fmt::Debug for Matrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for row in self.data.chunks(self.cols.max(1)) {
            writeln!(f, "  {row:?}")?;
        }
        write!(f, "]")
    }
}

/// LU factorization with partial pivoting, `P A = L U`.
#[derive(Clone, Debug)]
pub struct Lu<T> {
    factors: Matrix<T>,
    perm: Vec<usize>,
    sign: T,
}

impl<T: Real> Lu<T> {
    pub fn new(a: &Matrix<T>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch {
                what: "LU of non-square matrix".into(),
                expected: a.rows(),
                found: a.cols(),
            });
        }
        let n = a.rows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = T::one();
        let scale = a.max_abs();
        if scale == T::zero() || !scale.is_finite() {
            return Err(Error::SingularMatrix);
        }
        let tiny = scale * T::epsilon() * T::from_usize(n.max(1)).unwrap();
        for k in 0..n {
            let (pivot_row, pivot_abs) =
                (k..n)
                    .map(|i| (i, lu[(i, k)].abs()))
                    .fold((k, T::zero()), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot_abs <= tiny {
                return Err(Error::SingularMatrix);
            }
            if pivot_row != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(pivot_row, j)];
                    lu[(pivot_row, j)] = tmp;
                }
                perm.swap(k, pivot_row);
                sign = -sign;
            }
            let pivot = lu[(k, k)];
            for i in (k + 1)..n {
                let factor = lu[(i, k)] / pivot;
                lu[(i, k)] = factor;
                if factor != T::zero() {
                    for j in (k + 1)..n {
                        lu[(i, j)] = lu[(i, j)] - factor * lu[(k, j)];
                    }
                }
            }
        }
        Ok(Self {
            factors: lu,
            perm,
            sign,
        })
    }

    pub fn determinant(&self) -> T {
        self.factors.diag().into_iter().fold(self.sign, |acc, d| acc * d)
    }

    /// `ln |det A|` and the sign of `det A`.
    pub fn log_abs_determinant(&self) -> (T, T) {
        let mut sign = self.sign;
        let mut acc = T::zero();
        for d in self.factors.diag() {
            if d < T::zero() {
                sign = -sign;
            }
            acc = acc + d.abs().ln();
        }
        (acc, sign)
    }

    #[allow(clippy::needless_range_loop)]
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.factors.rows();
        assert_eq!(b.len(), n);
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s = s - self.factors[(i, j)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in (i + 1)..n {
                s = s - self.factors[(i, j)] * x[j];
            }
            x[i] = s / self.factors[(i, i)];
        }
        x
    }

    pub fn inverse(&self) -> Matrix<T> {
        let n = self.factors.rows();
        let mut inv = Matrix::zeros(n, n);
        let mut e = vec![T::zero(); n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = T::zero());
            e[j] = T::one();
            let col = self.solve(&e);
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        inv
    }
}

/// Lower Cholesky factor `L` with `A = L Lᵀ`, or `None` when `A` is not
/// numerically positive definite.
pub fn cholesky<T: Real>(a: &Matrix<T>) -> Option<Matrix<T>> {
    if !a.is_square() {
        return None;
    }
    let n = a.rows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d = d - l[(j, k)] * l[(j, k)];
        }
        if !(d > T::zero()) {
            return None;
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s = s - l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Some(l)
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn symmetric_eigenvalues<T: Real>(a: &Matrix<T>) -> Vec<T> {
    assert!(a.is_square());
    let n = a.rows();
    let mut m = a.symmetrize();
    let two = T::lit(2.0);
    for _sweep in 0..100 {
        let mut off = T::zero();
        for i in 0..n {
            for j in (i + 1)..n {
                off = off + m[(i, j)] * m[(i, j)];
            }
        }
        let scale = m.max_abs();
        if off.sqrt() <= T::epsilon() * scale * T::lit(1e-2) || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (two * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut eig = m.diag();
    eig.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    eig
}
