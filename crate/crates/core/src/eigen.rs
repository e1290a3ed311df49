//! Deterministic symmetric eigendecomposition.
//!
//! `sym_eigen` reduces the (symmetrized) input to tridiagonal form with
//! Householder reflections and then diagonalizes it by the implicit-shift
//! QL iteration, accumulating the orthogonal transform. The procedure is
//! a fixed sequence of floating-point operations with no randomness and
//! no data-dependent thread scheduling, so identical input bits always
//! produce identical output bits.
//!
//! Eigenpairs are returned sorted by descending eigenvalue. Each
//! eigenvector is sign-fixed so its entry of largest magnitude is
//! non-negative; exact eigenvalue ties are ordered by the first differing
//! entry of the sign-fixed vectors.

use crate::error::{Error, Result};
use crate::matrix::{cast, Matrix};
use crate::scalar::Scalar;

/// Maximum QL iterations per eigenvalue before reporting non-convergence.
const MAX_QL_ITERS: usize = 100;

/// Eigenvalues (descending) and the matching orthonormal eigenvectors.
///
/// Column `i` of `eigenvectors` pairs with `eigenvalues[i]`.
#[derive(Debug, Clone)]
pub struct EigenDecomposition<F> {
    eigenvalues: Vec<F>,
    eigenvectors: Matrix<F>,
}

impl<F: Scalar> EigenDecomposition<F> {
    pub fn eigenvalues(&self) -> &[F] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &Matrix<F> {
        &self.eigenvectors
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Eigenvector `i` as an owned column.
    pub fn eigenvector(&self, i: usize) -> Vec<F> {
        self.eigenvectors.col(i)
    }

    /// The `d x k` matrix of the `k` leading eigenvectors.
    pub fn leading_basis(&self, k: usize) -> Result<Matrix<F>> {
        let d = self.dim();
        if k == 0 || k > d {
            return Err(Error::dim(
                "leading_basis",
                format!("k = {k} out of range 1..={d}"),
            ));
        }
        Ok(Matrix::from_fn(d, k, |i, j| self.eigenvectors.get(i, j)))
    }

    /// Rank-`k` orthogonal projection `P = U_k U_kᵀ` onto the leading
    /// eigenvectors. `P` is symmetric, idempotent, and has trace `k`.
    pub fn top_k_projection(&self, k: usize) -> Result<Matrix<F>> {
        let u = self.leading_basis(k)?;
        u.matmul(&u.transpose())
    }

    /// `U diag(s) Uᵀ`, which recovers the (symmetrized) input.
    pub fn reconstruct(&self) -> Matrix<F> {
        let d = self.dim();
        let mut scaled = self.eigenvectors.clone();
        // scale column j by eigenvalue j, then multiply by Uᵀ
        for i in 0..d {
            for j in 0..d {
                let v = scaled.get(i, j) * self.eigenvalues[j];
                scaled.set(i, j, v);
            }
        }
        scaled
            .matmul(&self.eigenvectors.transpose())
            .expect("shapes agree by construction")
    }
}

/// Eigendecomposition of a symmetric matrix.
///
/// The input must be square and symmetric within `1e-9 * ||A||_F`
/// (Frobenius); it is symmetrized as `(A + Aᵀ)/2` before solving.
pub fn sym_eigen<F: Scalar>(a: &Matrix<F>) -> Result<EigenDecomposition<F>> {
    if !a.is_square() {
        return Err(Error::dim(
            "sym_eigen",
            format!("matrix is {}x{}", a.rows(), a.cols()),
        ));
    }
    let d = a.rows();
    let fro = a.frobenius_norm();
    // 1e-9 relative, floored at a machine-precision multiple so the gate
    // stays meaningful for f32.
    let rel = cast::<F>(1e-9).max(F::epsilon() * cast::<F>(50.0));
    let tol = fro * rel;
    let asym = asymmetry_fro(a);
    if asym > tol && fro > F::zero() {
        return Err(Error::NotSymmetric {
            asymmetry: asym.to_f64().unwrap_or(f64::NAN),
            tolerance: tol.to_f64().unwrap_or(f64::NAN),
        });
    }

    let sym = a.symmetrized();
    let mut v = sym.clone();
    let mut diag = vec![F::zero(); d];
    let mut off = vec![F::zero(); d];
    tred2(&mut v, &mut diag, &mut off);
    tql2(&mut v, &mut diag, &mut off)?;

    let (eigenvalues, eigenvectors) = sort_and_sign_fix(diag, v);
    eigenvectors.ensure_finite("sym_eigen")?;

    let decomposition = EigenDecomposition {
        eigenvalues,
        eigenvectors,
    };
    debug_assert!(
        orthonormality_residual(decomposition.eigenvectors())
            <= cast::<F>(1e-10) * crate::matrix::cast_usize::<F>(d)
            || F::epsilon() > cast::<F>(1e-10)
    );
    Ok(decomposition)
}

/// `||A - Aᵀ||_F`.
fn asymmetry_fro<F: Scalar>(a: &Matrix<F>) -> F {
    let mut acc = F::zero();
    for i in 0..a.rows() {
        for j in (i + 1)..a.cols() {
            let delta = a.get(i, j) - a.get(j, i);
            acc += delta * delta;
        }
    }
    (acc + acc).sqrt()
}

/// `||UᵀU - I||_F`.
pub fn orthonormality_residual<F: Scalar>(u: &Matrix<F>) -> F {
    let gram = u.transpose().matmul(u).expect("square product");
    let mut acc = F::zero();
    for i in 0..gram.rows() {
        for j in 0..gram.cols() {
            let want = if i == j { F::one() } else { F::zero() };
            let delta = gram.get(i, j) - want;
            acc += delta * delta;
        }
    }
    acc.sqrt()
}

/// Householder reduction to tridiagonal form, accumulating the transform.
///
/// On exit `v` holds the orthogonal matrix, `diag` the diagonal and `off`
/// the subdiagonal (in `off[1..]`). Classic EISPACK `tred2` ordering.
#[allow(clippy::needless_range_loop)] // keeps the canonical index structure
fn tred2<F: Scalar>(v: &mut Matrix<F>, diag: &mut [F], off: &mut [F]) {
    let n = v.rows();
    for j in 0..n {
        diag[j] = v.get(n - 1, j);
    }

    for i in (1..n).rev() {
        let mut scale = F::zero();
        let mut h = F::zero();
        for item in diag.iter().take(i) {
            scale += item.abs();
        }
        if scale == F::zero() {
            off[i] = diag[i - 1];
            for j in 0..i {
                diag[j] = v.get(i - 1, j);
                v.set(i, j, F::zero());
                v.set(j, i, F::zero());
            }
        } else {
            for item in diag.iter_mut().take(i) {
                *item /= scale;
                h += *item * *item;
            }
            let f = diag[i - 1];
            let mut g = h.sqrt();
            if f > F::zero() {
                g = -g;
            }
            off[i] = scale * g;
            h -= f * g;
            diag[i - 1] = f - g;
            for item in off.iter_mut().take(i) {
                *item = F::zero();
            }

            for j in 0..i {
                let f = diag[j];
                v.set(j, i, f);
                let mut g = off[j] + v.get(j, j) * f;
                for k in (j + 1)..i {
                    g += v.get(k, j) * diag[k];
                    off[k] += v.get(k, j) * f;
                }
                off[j] = g;
            }
            let mut f = F::zero();
            for j in 0..i {
                off[j] /= h;
                f += off[j] * diag[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                off[j] -= hh * diag[j];
            }
            for j in 0..i {
                let f = diag[j];
                let g = off[j];
                for k in j..i {
                    let updated = v.get(k, j) - (f * off[k] + g * diag[k]);
                    v.set(k, j, updated);
                }
                diag[j] = v.get(i - 1, j);
                v.set(i, j, F::zero());
            }
        }
        diag[i] = h;
    }

    // accumulate transformations
    for i in 0..(n - 1) {
        v.set(n - 1, i, v.get(i, i));
        v.set(i, i, F::one());
        let h = diag[i + 1];
        if h != F::zero() {
            for k in 0..=i {
                diag[k] = v.get(k, i + 1) / h;
            }
            for j in 0..=i {
                let mut g = F::zero();
                for k in 0..=i {
                    g += v.get(k, i + 1) * v.get(k, j);
                }
                for k in 0..=i {
                    let updated = v.get(k, j) - g * diag[k];
                    v.set(k, j, updated);
                }
            }
        }
        for k in 0..=i {
            v.set(k, i + 1, F::zero());
        }
    }
    for j in 0..n {
        diag[j] = v.get(n - 1, j);
        v.set(n - 1, j, F::zero());
    }
    v.set(n - 1, n - 1, F::one());
    off[0] = F::zero();
}

/// Implicit-shift QL iteration on the tridiagonal form, updating the
/// accumulated transform in `v`. Classic EISPACK `tql2` ordering.
#[allow(clippy::needless_range_loop)] // keeps the canonical index structure
fn tql2<F: Scalar>(v: &mut Matrix<F>, diag: &mut [F], off: &mut [F]) -> Result<()> {
    let n = v.rows();
    if n == 1 {
        return Ok(());
    }
    for i in 1..n {
        off[i - 1] = off[i];
    }
    off[n - 1] = F::zero();

    let eps = F::epsilon();
    let mut shift_total = F::zero();
    let mut tst1 = F::zero();

    for l in 0..n {
        tst1 = tst1.max(diag[l].abs() + off[l].abs());
        let mut m = l;
        while m < n {
            if off[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0usize;
            loop {
                iter += 1;
                if iter > MAX_QL_ITERS {
                    let residual = if tst1 > F::zero() {
                        (off[l] / tst1).abs()
                    } else {
                        off[l].abs()
                    };
                    return Err(Error::EigenNoConvergence {
                        residual: residual.to_f64().unwrap_or(f64::NAN),
                    });
                }

                // implicit shift from the 2x2 leading block
                let g = diag[l];
                let two = cast::<F>(2.0);
                let mut p = (diag[l + 1] - g) / (two * off[l]);
                let mut r = p.hypot(F::one());
                if p < F::zero() {
                    r = -r;
                }
                diag[l] = off[l] / (p + r);
                diag[l + 1] = off[l] * (p + r);
                let dl1 = diag[l + 1];
                let mut h = g - diag[l];
                for item in diag.iter_mut().take(n).skip(l + 2) {
                    *item -= h;
                }
                shift_total += h;

                // QL sweep
                p = diag[m];
                let mut c = F::one();
                let mut c2 = c;
                let mut c3 = c;
                let el1 = off[l + 1];
                let mut s = F::zero();
                let mut s2 = F::zero();
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * off[i];
                    h = c * p;
                    r = p.hypot(off[i]);
                    off[i + 1] = s * r;
                    s = off[i] / r;
                    c = p / r;
                    p = c * diag[i] - s * g;
                    diag[i + 1] = h + s * (c * g + s * diag[i]);
                    for k in 0..n {
                        h = v.get(k, i + 1);
                        v.set(k, i + 1, s * v.get(k, i) + c * h);
                        v.set(k, i, c * v.get(k, i) - s * h);
                    }
                }
                p = -s * s2 * c3 * el1 * off[l] / dl1;
                off[l] = s * p;
                diag[l] = c * p;

                if off[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        diag[l] += shift_total;
        off[l] = F::zero();
    }
    Ok(())
}

/// Sorts eigenpairs by descending eigenvalue and applies the sign fix.
fn sort_and_sign_fix<F: Scalar>(values: Vec<F>, vectors: Matrix<F>) -> (Vec<F>, Matrix<F>) {
    let d = values.len();
    let mut columns: Vec<(F, Vec<F>)> = (0..d)
        .map(|j| {
            let mut col = vectors.col(j);
            sign_fix(&mut col);
            (values[j], col)
        })
        .collect();

    columns.sort_by(|a, b| {
        // descending by value; exact ties ordered by the first differing
        // sign-fixed entry so the output is reproducible
        match b.0.partial_cmp(&a.0).expect("finite eigenvalues") {
            std::cmp::Ordering::Equal => {
                for (x, y) in a.1.iter().zip(b.1.iter()) {
                    match x.partial_cmp(y).expect("finite eigenvector entries") {
                        std::cmp::Ordering::Equal => continue,
                        other => return other,
                    }
                }
                std::cmp::Ordering::Equal
            }
            other => other,
        }
    });

    let sorted_values: Vec<F> = columns.iter().map(|(v, _)| *v).collect();
    let sorted_vectors = Matrix::from_fn(d, d, |i, j| columns[j].1[i]);
    (sorted_values, sorted_vectors)
}

/// Flips the vector so its entry of largest magnitude (first such index on
/// ties) is non-negative.
fn sign_fix<F: Scalar>(v: &mut [F]) {
    let mut best = 0usize;
    let mut best_abs = F::zero();
    for (i, x) in v.iter().enumerate() {
        if x.abs() > best_abs {
            best_abs = x.abs();
            best = i;
        }
    }
    if v[best] < F::zero() {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}
