//! Dense row-major matrices and the handful of vector helpers the rest of
//! the crate builds on.
//!
//! Everything here is a pure function of its inputs: same input bits give
//! the same output bits, regardless of thread count. Public operations
//! reject or never produce non-finite entries.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A dense real matrix stored row-major: `data[i * cols + j]` holds `A[i, j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<F> {
    rows: usize,
    cols: usize,
    data: Vec<F>,
}

impl<F: Scalar> Matrix<F> {
    /// Builds a matrix from row-major data, validating shape and finiteness.
    pub fn new(rows: usize, cols: usize, data: Vec<F>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::dim("Matrix::new", "rows and cols must be positive"));
        }
        if data.len() != rows * cols {
            return Err(Error::dim(
                "Matrix::new",
                format!("data length {} != {}x{}", data.len(), rows, cols),
            ));
        }
        let m = Matrix { rows, cols, data };
        m.ensure_finite("Matrix::new")?;
        Ok(m)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![F::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = F::one();
        }
        m
    }

    /// Builds from a closure over (row, col). Used heavily in tests.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> F) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
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

    pub fn data(&self) -> &[F] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> F {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: F) {
        self.data[i * self.cols + j] = v;
    }

    /// Row `i` as a contiguous slice.
    pub fn row(&self, i: usize) -> &[F] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Column `j` copied out (columns are strided in row-major storage).
    pub fn col(&self, j: usize) -> Vec<F> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn set_col(&mut self, j: usize, v: &[F]) {
        assert_eq!(v.len(), self.rows, "column length mismatch");
        for (i, &x) in v.iter().enumerate() {
            self.set(i, j, x);
        }
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.get(i, j);
            }
        }
        t
    }

    /// Matrix product `self * b`.
    ///
    /// Loop order is i-k-j so the inner updates stream over contiguous rows
    /// of `b` and of the output.
    pub fn matmul(&self, b: &Matrix<F>) -> Result<Matrix<F>> {
        if self.cols != b.rows {
            return Err(Error::dim(
                "matmul",
                format!(
                    "{}x{} cannot multiply {}x{}",
                    self.rows, self.cols, b.rows, b.cols
                ),
            ));
        }
        let mut out = Matrix::zeros(self.rows, b.cols);
        for i in 0..self.rows {
            let a_row = self.row(i);
            let out_row = &mut out.data[i * b.cols..(i + 1) * b.cols];
            for (k, &aik) in a_row.iter().enumerate() {
                if aik == F::zero() {
                    continue;
                }
                let b_row = &b.data[k * b.cols..(k + 1) * b.cols];
                for (o, &bkj) in out_row.iter_mut().zip(b_row.iter()) {
                    *o += aik * bkj;
                }
            }
        }
        out.ensure_finite("matmul")?;
        Ok(out)
    }

    /// `self * v` for a vector `v` of length `cols`.
    pub fn matvec(&self, v: &[F]) -> Result<Vec<F>> {
        if v.len() != self.cols {
            return Err(Error::dim(
                "matvec",
                format!("vector length {} != cols {}", v.len(), self.cols),
            ));
        }
        Ok((0..self.rows)
            .map(|i| dot(self.row(i), v))
            .collect())
    }

    pub fn add(&self, b: &Matrix<F>) -> Result<Matrix<F>> {
        self.zip_with(b, "add", |x, y| x + y)
    }

    pub fn sub(&self, b: &Matrix<F>) -> Result<Matrix<F>> {
        self.zip_with(b, "sub", |x, y| x - y)
    }

    pub fn scale(&self, s: F) -> Matrix<F> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| x * s).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> F {
        self.data
            .iter()
            .fold(F::zero(), |acc, &x| acc + x * x)
            .sqrt()
    }

    pub fn trace(&self) -> F {
        debug_assert!(self.is_square());
        (0..self.rows).fold(F::zero(), |acc, i| acc + self.get(i, i))
    }

    /// `(1/cols) * self * selfᵀ`, the sample covariance when columns are
    /// samples. Exploits symmetry and row contiguity.
    pub fn gram_scaled(&self) -> Matrix<F> {
        let d = self.rows;
        let inv_n = F::one() / cast_usize::<F>(self.cols);
        let mut out = Matrix::zeros(d, d);
        for i in 0..d {
            for j in i..d {
                let v = dot(self.row(i), self.row(j)) * inv_n;
                out.data[i * d + j] = v;
                out.data[j * d + i] = v;
            }
        }
        out
    }

    /// Largest absolute asymmetry `max |A_ij - A_ji|`. Zero for non-square.
    pub fn asymmetry(&self) -> F {
        if !self.is_square() {
            return F::zero();
        }
        let mut worst = F::zero();
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let delta = (self.get(i, j) - self.get(j, i)).abs();
                if delta > worst {
                    worst = delta;
                }
            }
        }
        worst
    }

    /// Symmetric part `(A + Aᵀ) / 2`.
    pub fn symmetrized(&self) -> Matrix<F> {
        debug_assert!(self.is_square());
        let half = cast::<F>(0.5);
        Matrix::from_fn(self.rows, self.cols, |i, j| {
            (self.get(i, j) + self.get(j, i)) * half
        })
    }

    fn zip_with(
        &self,
        b: &Matrix<F>,
        op: &'static str,
        f: impl Fn(F, F) -> F,
    ) -> Result<Matrix<F>> {
        if self.rows != b.rows || self.cols != b.cols {
            return Err(Error::dim(
                op,
                format!(
                    "{}x{} vs {}x{}",
                    self.rows, self.cols, b.rows, b.cols
                ),
            ));
        }
        let data = self
            .data
            .iter()
            .zip(b.data.iter())
            .map(|(&x, &y)| f(x, y))
            .collect();
        let out = Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        };
        out.ensure_finite(op)?;
        Ok(out)
    }

    pub(crate) fn ensure_finite(&self, op: &'static str) -> Result<()> {
        if self.data.iter().all(|x| x.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite(op))
        }
    }

    pub(crate) fn data_mut(&mut self) -> &mut [F] {
        &mut self.data
    }
}

/// Euclidean inner product. Errors on length mismatch.
pub fn inner<F: Scalar>(u: &[F], v: &[F]) -> Result<F> {
    if u.len() != v.len() {
        return Err(Error::dim(
            "inner",
            format!("lengths {} vs {}", u.len(), v.len()),
        ));
    }
    Ok(dot(u, v))
}

/// Euclidean norm.
pub fn norm2<F: Scalar>(v: &[F]) -> F {
    dot(v, v).sqrt()
}

#[inline]
pub(crate) fn dot<F: Scalar>(u: &[F], v: &[F]) -> F {
    debug_assert_eq!(u.len(), v.len());
    let mut acc = F::zero();
    for (&a, &b) in u.iter().zip(v.iter()) {
        acc += a * b;
    }
    acc
}

pub(crate) fn cast<F: Scalar>(x: f64) -> F {
    crate::scalar::cast(x)
}

pub(crate) fn cast_usize<F: Scalar>(n: usize) -> F {
    F::from_usize(n).expect("usize representable in scalar type")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Matrix64;

    fn naive_matmul(a: &Matrix64, b: &Matrix64) -> Matrix64 {
        // Deliberately the textbook i-j-k triple loop, kept as an
        // independent oracle for the streaming implementation above.
        let mut out = Matrix64::zeros(a.rows(), b.cols());
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
    fn identity_times_matrix_is_matrix() {
        let a = Matrix64::new(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let id = Matrix64::identity(3);
        assert_eq!(id.matmul(&a).unwrap(), a);
    }

    #[test]
    fn two_by_two_swap() {
        let a = Matrix64::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let swap = Matrix64::new(2, 2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let got = a.matmul(&swap).unwrap();
        assert_eq!(got.data(), &[2.0, 1.0, 4.0, 3.0]);
    }

    #[test]
    fn matmul_matches_naive_oracle() {
        // Fixed pseudo-random entries; compares the streaming product
        // against the triple-loop oracle entrywise.
        let mut state = 88172645463325252u64;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state % 2000) as f64 / 1000.0 - 1.0
        };
        let a = Matrix64::from_fn(5, 4, |_, _| next());
        let b = Matrix64::from_fn(4, 3, |_, _| next());
        let got = a.matmul(&b).unwrap();
        let want = naive_matmul(&a, &b);
        for (g, w) in got.data().iter().zip(want.data().iter()) {
            assert!((g - w).abs() <= 1e-12, "{g} vs {w}");
        }
    }

    #[test]
    fn matmul_shape_mismatch_errors() {
        let a = Matrix64::zeros(2, 3);
        let b = Matrix64::zeros(2, 3);
        assert!(a.matmul(&b).is_err());
    }

    #[test]
    fn rejects_non_finite_input() {
        assert!(Matrix64::new(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(Matrix64::new(1, 2, vec![f64::INFINITY, 0.0]).is_err());
    }

    #[test]
    fn inner_and_norm() {
        assert_eq!(inner(&[1.0, 2.0], &[3.0, 4.0]).unwrap(), 11.0);
        assert_eq!(norm2(&[3.0, 4.0]), 5.0);
        assert!(inner(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn gram_scaled_is_covariance() {
        let x = Matrix64::new(2, 3, vec![1.0, 2.0, 3.0, 0.0, -1.0, 1.0]).unwrap();
        let cov = x.gram_scaled();
        let want = naive_matmul(&x, &x.transpose()).scale(1.0 / 3.0);
        for (g, w) in cov.data().iter().zip(want.data().iter()) {
            assert!((g - w).abs() <= 1e-14);
        }
    }

    #[test]
    fn works_in_f32_too() {
        let a = crate::Matrix32::new(2, 2, vec![2.0f32, 0.0, 0.0, 2.0]).unwrap();
        let b = a.matmul(&a).unwrap();
        assert_eq!(b.get(0, 0), 4.0f32);
    }
}
