//! Small dense row-major matrices and the handful of factorizations the
//! estimators need. Sizes here are tiny (k ≤ 10, Q ≤ 100).

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: fmt::Debug> fmt::Debug for Matrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", &self.data[i * self.cols..(i + 1) * self.cols])?;
        }
        write!(f, "]")
    }
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length mismatch");
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[&[T]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Self { rows: r, cols: c, data }
    }

    pub fn from_f64_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let data = rows.iter().flat_map(|row| row.iter().map(|&x| T::c(x))).collect();
        Self { rows: r, cols: c, data }
    }

    pub fn diag(values: &[T]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
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
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| f(x)).collect() }
    }

    /// Entrywise absolute value, |M|_vec.
    pub fn abs(&self) -> Self {
        self.map(|x| x.abs())
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|x| x * s)
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| a + b).collect();
        Self { rows: self.rows, cols: self.cols, data }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| a - b).collect();
        Self { rows: self.rows, cols: self.cols, data }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for l in 0..self.cols {
                let a = self[(i, l)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other[(l, j)];
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.cols, v.len(), "matvec dimension mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).fold(T::zero(), |acc, (&a, &b)| acc + a * b))
            .collect()
    }

    /// Horizontal concatenation [self, other].
    pub fn hcat(&self, other: &Self) -> Self {
        assert_eq!(self.rows, other.rows);
        let cols = self.cols + other.cols;
        let mut out = Self::zeros(self.rows, cols);
        for i in 0..self.rows {
            out.row_mut(i)[..self.cols].copy_from_slice(self.row(i));
            out.row_mut(i)[self.cols..].copy_from_slice(other.row(i));
        }
        out
    }

    /// Maximum absolute row sum.
    pub fn inf_norm(&self) -> T {
        (0..self.rows)
            .map(|i| self.row(i).iter().fold(T::zero(), |a, &x| a + x.abs()))
            .fold(T::zero(), T::max)
    }

    /// Maximum absolute column sum (induced ℓ1 norm).
    pub fn one_norm(&self) -> T {
        (0..self.cols)
            .map(|j| (0..self.rows).fold(T::zero(), |a, i| a + self[(i, j)].abs()))
            .fold(T::zero(), T::max)
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |a, &x| a.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.rows).all(|i| (0..self.cols).all(|j| i == j || self[(i, j)] == T::zero()))
    }

    pub fn symmetrize(&self) -> Self {
        let t = self.transpose();
        self.add(&t).scale(T::c(0.5))
    }

    pub fn max_asymmetry(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.rows {
            for j in 0..i {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    /// LU factorization with partial pivoting.
    fn lu(&self) -> Result<(Matrix<T>, Vec<usize>)> {
        if !self.is_square() {
            return Err(Error::Input(format!("LU of non-square {}x{} matrix", self.rows, self.cols)));
        }
        let n = self.rows;
        let mut lu = self.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = self.max_abs().max(T::min_positive_value());
        for col in 0..n {
            let (piv, best) = (col..n)
                .map(|r| (r, lu[(r, col)].abs()))
                .fold((col, T::zero()), |acc, x| if x.1 > acc.1 { x } else { acc });
            if best <= scale * T::epsilon() * T::c(16.0) {
                return Err(Error::Numeric("singular matrix in LU factorization".into()));
            }
            if piv != col {
                for j in 0..n {
                    lu.data.swap(col * n + j, piv * n + j);
                }
                perm.swap(col, piv);
            }
            let p = lu[(col, col)];
            for r in col + 1..n {
                let f = lu[(r, col)] / p;
                lu[(r, col)] = f;
                for j in col + 1..n {
                    let v = lu[(col, j)];
                    lu[(r, j)] -= f * v;
                }
            }
        }
        Ok((lu, perm))
    }

    /// Solves `self · X = rhs` for a matrix right-hand side.
    pub fn solve(&self, rhs: &Matrix<T>) -> Result<Matrix<T>> {
        assert_eq!(self.rows, rhs.rows);
        let (lu, perm) = self.lu()?;
        let n = self.rows;
        let mut out = Matrix::zeros(n, rhs.cols);
        for c in 0..rhs.cols {
            let mut y: Vec<T> = perm.iter().map(|&p| rhs[(p, c)]).collect();
            for i in 0..n {
                for j in 0..i {
                    let v = lu[(i, j)] * y[j];
                    y[i] -= v;
                }
            }
            for i in (0..n).rev() {
                for j in i + 1..n {
                    let v = lu[(i, j)] * y[j];
                    y[i] -= v;
                }
                y[i] /= lu[(i, i)];
            }
            for i in 0..n {
                out[(i, c)] = y[i];
            }
        }
        Ok(out)
    }

    pub fn solve_vec(&self, rhs: &[T]) -> Result<Vec<T>> {
        let b = Matrix::from_vec(rhs.len(), 1, rhs.to_vec());
        Ok(self.solve(&b)?.data)
    }

    pub fn inverse(&self) -> Result<Matrix<T>> {
        self.solve(&Matrix::identity(self.rows))
    }

    /// Lower Cholesky factor L with L Lᵀ = self; errors when not positive definite.
    pub fn cholesky(&self) -> Result<Matrix<T>> {
        if !self.is_square() {
            return Err(Error::Input("Cholesky of non-square matrix".into()));
        }
        let n = self.rows;
        let mut l = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let mut s = self[(i, j)];
                for p in 0..j {
                    s -= l[(i, p)] * l[(j, p)];
                }
                if i == j {
                    if s <= T::zero() || !s.is_finite() {
                        return Err(Error::Input("matrix is not positive definite".into()));
                    }
                    l[(i, i)] = s.sqrt();
                } else {
                    l[(i, j)] = s / l[(j, j)];
                }
            }
        }
        Ok(l)
    }

    /// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
    pub fn symmetric_eigenvalues(&self) -> Vec<T> {
        let n = self.rows;
        let mut a = self.symmetrize();
        for _sweep in 0..100 {
            let mut off = T::zero();
            for i in 0..n {
                for j in 0..i {
                    off += a[(i, j)] * a[(i, j)];
                }
            }
            if off <= T::epsilon() * T::epsilon() * a.max_abs().powi(2) {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a[(p, q)];
                    if apq == T::zero() {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (T::c(2.0) * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                    let c = (t * t + T::one()).sqrt().recip();
                    let s = t * c;
                    for r in 0..n {
                        let arp = a[(r, p)];
                        let arq = a[(r, q)];
                        a[(r, p)] = c * arp - s * arq;
                        a[(r, q)] = s * arp + c * arq;
                    }
                    for r in 0..n {
                        let apr = a[(p, r)];
                        let aqr = a[(q, r)];
                        a[(p, r)] = c * apr - s * aqr;
                        a[(q, r)] = s * apr + c * aqr;
                    }
                }
            }
        }
        let mut ev = a.diagonal();
        ev.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
        ev
    }

    /// Numerical rank by Gaussian elimination with full pivoting; entries
    /// below `rel_tol · max|entry|` count as zero.
    pub fn rank(&self, rel_tol: T) -> usize {
        let mut a = self.clone();
        let tol = rel_tol * self.max_abs();
        if self.max_abs() == T::zero() {
            return 0;
        }
        let (m, n) = (a.rows, a.cols);
        let mut rank = 0;
        let mut row_used = vec![false; m];
        let mut col_used = vec![false; n];
        loop {
            let mut best = (0, 0, T::zero());
            for i in (0..m).filter(|&i| !row_used[i]) {
                for j in (0..n).filter(|&j| !col_used[j]) {
                    if a[(i, j)].abs() > best.2 {
                        best = (i, j, a[(i, j)].abs());
                    }
                }
            }
            if best.2 <= tol {
                break;
            }
            let (pi, pj, _) = best;
            row_used[pi] = true;
            col_used[pj] = true;
            rank += 1;
            let pv = a[(pi, pj)];
            for i in (0..m).filter(|&i| !row_used[i]) {
                let f = a[(i, pj)] / pv;
                if f == T::zero() {
                    continue;
                }
                for j in 0..n {
                    let v = a[(pi, j)];
                    a[(i, j)] -= f * v;
                }
            }
        }
        rank
    }

    pub fn cast<U: Scalar>(&self) -> Matrix<U> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| U::c(x.to_f64_lossy())).collect(),
        }
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_and_inverse() {
        let a = Matrix::<f64>::from_f64_rows(&[&[4.0, 1.0, 0.5], &[1.0, 3.0, 0.2], &[0.5, 0.2, 2.0]]);
        let inv = a.inverse().unwrap();
        let id = a.matmul(&inv);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((id[(i, j)] - want).abs() < 1e-14);
            }
        }
        let singular = Matrix::<f64>::from_f64_rows(&[&[1.0, 2.0], &[2.0, 4.0]]);
        assert!(singular.inverse().is_err());
    }

    #[test]
    fn cholesky_roundtrip() {
        let a = Matrix::<f64>::from_f64_rows(&[&[1.0, 0.6], &[0.6, 1.0]]);
        let l = a.cholesky().unwrap();
        let back = l.matmul(&l.transpose());
        assert!(back.sub(&a).max_abs() < 1e-15);
        let bad = Matrix::<f64>::from_f64_rows(&[&[1.0, 1.2], &[1.2, 1.0]]);
        assert!(bad.cholesky().is_err());
    }

    #[test]
    fn jacobi_eigenvalues() {
        let a = Matrix::<f64>::from_f64_rows(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let ev = a.symmetric_eigenvalues();
        assert!((ev[0] - 1.0).abs() < 1e-14 && (ev[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn rank_detection() {
        let a = Matrix::<f64>::from_f64_rows(&[&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]]);
        assert_eq!(a.rank(1e-10), 1);
        let b = Matrix::<f64>::from_f64_rows(&[&[1.0, 0.0, 3.0], &[2.0, 4.0, 6.0]]);
        assert_eq!(b.rank(1e-10), 2);
        assert_eq!(Matrix::<f64>::zeros(2, 2).rank(1e-10), 0);
    }
}
