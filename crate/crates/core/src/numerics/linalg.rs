//! Small dense matrices, Cholesky solves and a symmetric eigensolver.
//!
//! Everything here is sized for chart dimensions (d up to a few hundred), so
//! storage is a flat row-major `Vec` and no blocking or pivoting is attempted.

use std::ops::{Index, IndexMut};

use super::dual::Scalar;
use crate::error::{Error, Result};

/// Row-major dense matrix over any [`Scalar`].
#[derive(Clone, Debug, PartialEq)]
pub struct Mat<S = f64> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

pub type Matrix = Mat<f64>;

impl<S: Scalar> Mat<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![S::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = S::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Mat { rows, cols, data }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<S>) -> Self {
        assert_eq!(data.len(), rows * cols, "row-major buffer has the wrong length");
        Mat { rows, cols, data }
    }

    pub fn diagonal(diag: &[S]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, v) in diag.iter().enumerate() {
            m[(i, i)] = v.clone();
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[S] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[S] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].clone())
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows);
        Self::from_fn(self.rows, other.cols, |i, j| {
            let mut acc = S::zero();
            for k in 0..self.cols {
                acc = acc + self[(i, k)].clone() * other[(k, j)].clone();
            }
            acc
        })
    }

    pub fn matvec(&self, v: &[S]) -> Vec<S> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .fold(S::zero(), |acc, (a, b)| acc + a.clone() * b.clone())
            })
            .collect()
    }

    /// `uᵀ A v`.
    pub fn bilinear(&self, u: &[S], v: &[S]) -> S {
        let av = self.matvec(v);
        dot(u, &av)
    }

    /// `JᵀJ`, the Gram matrix of the columns.
    pub fn gram(&self) -> Self {
        Self::from_fn(self.cols, self.cols, |i, j| {
            let mut acc = S::zero();
            for k in 0..self.rows {
                acc = acc + self[(k, i)].clone() * self[(k, j)].clone();
            }
            acc
        })
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T) -> Mat<T> {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(f).collect(),
        }
    }
}

impl<S> Index<(usize, usize)> for Mat<S> {
    type Output = S;
    fn index(&self, (i, j): (usize, usize)) -> &S {
        &self.data[i * self.cols + j]
    }
}

impl<S> IndexMut<(usize, usize)> for Mat<S> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut S {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter()
        .zip(b)
        .fold(S::zero(), |acc, (x, y)| acc + x.clone() * y.clone())
}

pub fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(alpha: f64, a: &[f64]) -> Vec<f64> {
    a.iter().map(|x| alpha * x).collect()
}

impl Matrix {
    pub fn add_assign(&mut self, other: &Matrix) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scaled(&self, alpha: f64) -> Matrix {
        self.map(|v| alpha * v)
    }

    /// `(A + Aᵀ) / 2`.
    pub fn symmetrized(&self) -> Matrix {
        Matrix::from_fn(self.rows, self.cols, |i, j| 0.5 * (self[(i, j)] + self[(j, i)]))
    }

    /// Largest `|A_ij - A_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in 0..i {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }
}

/// Lower-triangular Cholesky factor `A = L Lᵀ`.
#[derive(Clone, Debug)]
pub struct Cholesky {
    l: Matrix,
}

impl Cholesky {
    /// Factor the lower triangle of `a`. No pivoting: a non-positive pivot is
    /// reported as [`Error::NotSpd`] rather than worked around.
    pub fn new(a: &Matrix) -> Result<Self> {
        let n = a.rows();
        if a.cols() != n {
            return Err(Error::Shape {
                expected: format!("{n}x{n}"),
                got: format!("{}x{}", a.rows(), a.cols()),
            });
        }
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut pivot = a[(j, j)];
            for k in 0..j {
                pivot -= l[(j, k)] * l[(j, k)];
            }
            // A pivot at roundoff level of its diagonal means numerical rank loss.
            let floor = 4.0 * n as f64 * f64::EPSILON * a[(j, j)].abs();
            if !(pivot > floor) || !pivot.is_finite() {
                return Err(Error::NotSpd {
                    pivot: j,
                    value: pivot,
                    location: None,
                });
            }
            let ljj = pivot.sqrt();
            l[(j, j)] = ljj;
            for i in j + 1..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / ljj;
            }
        }
        Ok(Cholesky { l })
    }

    pub fn factor(&self) -> &Matrix {
        &self.l
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.l.rows();
        assert_eq!(b.len(), n);
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.l[(i, k)] * y[k];
            }
            y[i] = s / self.l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= self.l[(k, i)] * y[k];
            }
            y[i] = s / self.l[(i, i)];
        }
        y
    }

    pub fn solve_mat(&self, b: &Matrix) -> Matrix {
        let n = self.l.rows();
        assert_eq!(b.rows(), n);
        let mut out = Matrix::zeros(n, b.cols());
        let mut col = vec![0.0; n];
        for j in 0..b.cols() {
            for i in 0..n {
                col[i] = b[(i, j)];
            }
            let x = self.solve(&col);
            for i in 0..n {
                out[(i, j)] = x[i];
            }
        }
        out
    }

    /// `A⁻¹`, symmetrized to remove roundoff asymmetry.
    pub fn inverse(&self) -> Matrix {
        let n = self.l.rows();
        self.solve_mat(&Matrix::identity(n)).symmetrized()
    }

    pub fn log_det(&self) -> f64 {
        (0..self.l.rows()).map(|i| 2.0 * self.l[(i, i)].ln()).sum()
    }
}

/// Solve `A x = b` for symmetric positive definite `A`.
pub fn spd_solve(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != a.rows() {
        return Err(Error::Shape {
            expected: format!("vector of length {}", a.rows()),
            got: format!("length {}", b.len()),
        });
    }
    Ok(Cholesky::new(a)?.solve(b))
}

/// Solve `A X = B` column by column for symmetric positive definite `A`.
pub fn spd_solve_mat(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if b.rows() != a.rows() {
        return Err(Error::Shape {
            expected: format!("{} rows", a.rows()),
            got: format!("{} rows", b.rows()),
        });
    }
    Ok(Cholesky::new(a)?.solve_mat(b))
}

pub fn spd_inverse(a: &Matrix) -> Result<Matrix> {
    Ok(Cholesky::new(a)?.inverse())
}

/// Eigenpairs of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in descending order and the matching unit eigenvectors
/// as the columns of the returned matrix. Iterates until the off-diagonal
/// Frobenius norm is below `tol` (relative to the matrix norm).
pub fn symmetric_eigen(a: &Matrix, tol: f64) -> (Vec<f64>, Matrix) {
    let n = a.rows();
    let mut m = a.symmetrized();
    let mut v = Matrix::identity(n);
    let scale = m.frobenius().max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    off += m[(i, j)] * m[(i, j)];
                }
            }
        }
        if off.sqrt() <= tol * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
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
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].total_cmp(&m[(i, i)]));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let vectors = Matrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    (values, vectors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> Matrix {
        let l = Matrix::from_fn(n, n, |i, j| {
            if i == j {
                1.0 + rng.random::<f64>()
            } else if j < i {
                rng.random::<f64>() - 0.5
            } else {
                0.0
            }
        });
        l.matmul(&l.transpose())
    }

    #[test]
    fn identity_solve() {
        let b = vec![1.0, -2.0, 3.0];
        assert_eq!(spd_solve(&Matrix::identity(3), &b).unwrap(), b);
    }

    #[test]
    fn diagonal_solve() {
        let a = Matrix::diagonal(&[4.0, 9.0]);
        let x = spd_solve(&a, &[8.0, 27.0]).unwrap();
        assert_eq!(x, vec![2.0, 3.0]);
    }

    #[test]
    fn construct_then_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [1, 2, 5, 10, 30] {
            let a = random_spd(n, &mut rng);
            let x0: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
            let b = a.matvec(&x0);
            let x = spd_solve(&a, &b).unwrap();
            for (u, v) in x.iter().zip(&x0) {
                assert!((u - v).abs() < 1e-9, "n={n}");
            }
            let resid = sub(&a.matvec(&x), &b);
            assert!(norm(&resid) <= 1e-10 * norm(&b).max(1.0));
        }
    }

    #[test]
    fn indefinite_reports_pivot() {
        let a = Matrix::from_row_major(2, 2, vec![1.0, 2.0, 2.0, 1.0]);
        match Cholesky::new(&a) {
            Err(Error::NotSpd { pivot, value, .. }) => {
                assert_eq!(pivot, 1);
                assert!((value + 3.0).abs() < 1e-12);
            }
            other => panic!("expected NotSpd, got {other:?}"),
        }
        let neg = Matrix::diagonal(&[-1.0, 1.0]);
        assert!(matches!(Cholesky::new(&neg), Err(Error::NotSpd { pivot: 0, .. })));
    }

    #[test]
    fn inverse_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_spd(6, &mut rng);
        let inv = spd_inverse(&a).unwrap();
        assert_eq!(inv.asymmetry(), 0.0);
        let prod = a.matmul(&inv);
        assert!(prod.max_abs_diff(&Matrix::identity(6)) < 1e-10);
    }

    #[test]
    fn jacobi_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_spd(5, &mut rng);
        let (vals, vecs) = symmetric_eigen(&a, 1e-14);
        assert!(vals.windows(2).all(|w| w[0] >= w[1]));
        let recon = vecs.matmul(&Matrix::diagonal(&vals)).matmul(&vecs.transpose());
        assert!(recon.max_abs_diff(&a) < 1e-10);
        let orth = vecs.transpose().matmul(&vecs);
        assert!(orth.max_abs_diff(&Matrix::identity(5)) < 1e-10);
        assert!((vals.iter().sum::<f64>() - a.trace()).abs() < 1e-10);
    }
}
