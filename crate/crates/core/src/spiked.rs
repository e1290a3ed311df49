//! Ground-truth spiked covariance model and dataset generation.
//!
//! A sample is `x = sum_i lambda_i z_i u_i` with `z_i` i.i.d. zero-mean
//! unit-variance latents and `u_i` a fixed orthonormal basis of rank `r`
//! in ambient dimension `d`, so the population covariance is the rank-`r`
//! spike `sum_i lambda_i^2 u_i u_iᵀ`. The forward corruption adds
//! isotropic Gaussian noise on top.

use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::matrix::{cast, cast_usize, dot, norm2, Matrix};
use crate::rng::keyed_rng;
use crate::scalar::Scalar;

/// Latent coefficient distribution; all three are zero-mean, unit-variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatentDist {
    Gaussian,
    Rademacher,
    Uniform,
}

impl LatentDist {
    fn sample<F: Scalar, R: Rng>(self, rng: &mut R) -> F {
        match self {
            LatentDist::Gaussian => F::standard_normal(rng),
            LatentDist::Rademacher => {
                if rng.gen::<bool>() {
                    F::one()
                } else {
                    -F::one()
                }
            }
            // U[-sqrt(3), sqrt(3)] has unit variance
            LatentDist::Uniform => {
                let u: f64 = rng.gen();
                cast::<F>((2.0 * u - 1.0) * 3.0f64.sqrt())
            }
        }
    }
}

impl std::str::FromStr for LatentDist {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(LatentDist::Gaussian),
            "rademacher" => Ok(LatentDist::Rademacher),
            "uniform" => Ok(LatentDist::Uniform),
            other => Err(Error::arg(
                "latent_dist",
                format!("unknown latent distribution `{other}`"),
            )),
        }
    }
}

/// Ground-truth low-rank population model.
#[derive(Debug, Clone)]
pub struct SpikedModelSpec<F> {
    dim: usize,
    lambdas: Vec<F>,
    basis: Matrix<F>,
    latent: LatentDist,
}

impl<F: Scalar> SpikedModelSpec<F> {
    /// Validates and assembles a model: `lambdas` strictly descending and
    /// positive, `basis` `d x r` with orthonormal columns.
    pub fn new(lambdas: Vec<F>, basis: Matrix<F>, latent: LatentDist) -> Result<Self> {
        let (d, r) = (basis.rows(), basis.cols());
        if r > d {
            return Err(Error::dim(
                "SpikedModelSpec::new",
                format!("rank {r} exceeds dimension {d}"),
            ));
        }
        if lambdas.len() != r {
            return Err(Error::dim(
                "SpikedModelSpec::new",
                format!("{} lambdas for a rank-{r} basis", lambdas.len()),
            ));
        }
        if lambdas.is_empty() {
            return Err(Error::arg("SpikedModelSpec::new", "rank must be positive"));
        }
        for w in lambdas.windows(2) {
            if w[0] <= w[1] {
                return Err(Error::arg(
                    "SpikedModelSpec::new",
                    "lambdas must be strictly descending",
                ));
            }
        }
        if lambdas[lambdas.len() - 1] <= F::zero() {
            return Err(Error::arg(
                "SpikedModelSpec::new",
                "lambdas must be strictly positive",
            ));
        }
        let ortho = crate::eigen::orthonormality_residual(&basis);
        if ortho > cast::<F>(1e-10).max(F::epsilon() * cast::<F>(100.0)) {
            return Err(Error::arg(
                "SpikedModelSpec::new",
                format!("basis columns not orthonormal (residual {ortho:e})"),
            ));
        }
        Ok(SpikedModelSpec {
            dim: d,
            lambdas,
            basis,
            latent,
        })
    }

    /// Model with a seeded random orthonormal basis.
    pub fn random(
        d: usize,
        lambdas: Vec<F>,
        latent: LatentDist,
        seed: u64,
    ) -> Result<Self> {
        let basis = random_orthonormal_basis(d, lambdas.len(), seed)?;
        Self::new(lambdas, basis, latent)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.lambdas.len()
    }

    pub fn lambdas(&self) -> &[F] {
        &self.lambdas
    }

    pub fn basis(&self) -> &Matrix<F> {
        &self.basis
    }

    pub fn latent(&self) -> LatentDist {
        self.latent
    }

    /// Component `i` of the clean basis.
    pub fn component(&self, i: usize) -> Vec<F> {
        self.basis.col(i)
    }

    /// Population covariance `sum_i lambda_i^2 u_i u_iᵀ`.
    pub fn population_covariance(&self) -> Matrix<F> {
        let d = self.dim;
        let mut cov = Matrix::zeros(d, d);
        for (i, &l) in self.lambdas.iter().enumerate() {
            let u = self.component(i);
            let w = l * l;
            for a in 0..d {
                let ua = u[a] * w;
                for (b, &ub) in u.iter().enumerate() {
                    let v = cov.get(a, b) + ua * ub;
                    cov.set(a, b, v);
                }
            }
        }
        cov
    }
}

/// Where a dataset came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetSource {
    Synthetic,
    File,
}

/// Samples as columns of a `d x n` matrix.
#[derive(Debug, Clone)]
pub struct Dataset<F> {
    samples: Matrix<F>,
    source: DatasetSource,
}

impl<F: Scalar> Dataset<F> {
    pub fn new(samples: Matrix<F>, source: DatasetSource) -> Result<Self> {
        if samples.cols() < 2 {
            return Err(Error::arg(
                "Dataset::new",
                "need at least 2 sample columns",
            ));
        }
        samples.ensure_finite("Dataset::new")?;
        Ok(Dataset { samples, source })
    }

    pub fn samples(&self) -> &Matrix<F> {
        &self.samples
    }

    pub fn dim(&self) -> usize {
        self.samples.rows()
    }

    pub fn len(&self) -> usize {
        self.samples.cols()
    }

    pub fn is_empty(&self) -> bool {
        false // n >= 2 by construction
    }

    pub fn source(&self) -> DatasetSource {
        self.source
    }

    /// Copy with the per-row (feature) mean subtracted.
    pub fn centered(&self) -> Dataset<F> {
        let d = self.dim();
        let n = self.len();
        let inv_n = F::one() / cast_usize::<F>(n);
        let mut out = self.samples.clone();
        for i in 0..d {
            let mean = self.samples.row(i).iter().fold(F::zero(), |a, &x| a + x) * inv_n;
            for v in &mut out.data_mut()[i * n..(i + 1) * n] {
                *v -= mean;
            }
        }
        Dataset {
            samples: out,
            source: self.source,
        }
    }
}

/// Seeded random `d x r` matrix with orthonormal columns: Gaussian entries
/// followed by modified Gram-Schmidt with a second orthogonalization pass.
pub fn random_orthonormal_basis<F: Scalar>(d: usize, r: usize, seed: u64) -> Result<Matrix<F>> {
    if r > d {
        return Err(Error::dim(
            "random_orthonormal_basis",
            format!("rank {r} exceeds dimension {d}"),
        ));
    }
    if r == 0 {
        return Err(Error::arg("random_orthonormal_basis", "rank must be positive"));
    }
    let mut cols: Vec<Vec<F>> = (0..r)
        .map(|j| {
            let mut rng = keyed_rng(seed, "basis", &[j as u64]);
            (0..d).map(|_| F::standard_normal(&mut rng)).collect()
        })
        .collect();

    for j in 0..r {
        for pass in 0..2 {
            let _ = pass;
            for k in 0..j {
                let proj = dot(&cols[j], &cols[k]);
                let prev = cols[k].clone();
                for (x, p) in cols[j].iter_mut().zip(prev.iter()) {
                    *x -= proj * *p;
                }
            }
        }
        let norm = norm2(&cols[j]);
        if norm < cast::<F>(1e-8) {
            // astronomically unlikely for Gaussian draws; fail loudly
            return Err(Error::arg(
                "random_orthonormal_basis",
                "degenerate Gaussian draw",
            ));
        }
        let inv = F::one() / norm;
        for x in cols[j].iter_mut() {
            *x *= inv;
        }
    }

    Ok(Matrix::from_fn(d, r, |i, j| cols[j][i]))
}

/// Draws `n` clean samples from the model. Column `j` uses its own random
/// stream, so any subset of columns is reproducible independently.
pub fn sample_clean<F: Scalar>(
    spec: &SpikedModelSpec<F>,
    n: usize,
    seed: u64,
) -> Result<Dataset<F>> {
    if n < 2 {
        return Err(Error::arg("sample_clean", "need n >= 2"));
    }
    let d = spec.dim();
    let r = spec.rank();
    let columns: Vec<Vec<F>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut rng = keyed_rng(seed, "latent", &[j as u64]);
            let coeffs: Vec<F> = (0..r)
                .map(|i| spec.lambdas[i] * spec.latent.sample::<F, _>(&mut rng))
                .collect();
            let mut x = vec![F::zero(); d];
            for (i, &c) in coeffs.iter().enumerate() {
                for (a, xa) in x.iter_mut().enumerate() {
                    *xa += c * spec.basis.get(a, i);
                }
            }
            x
        })
        .collect();

    let samples = Matrix::from_fn(d, n, |i, j| columns[j][i]);
    Dataset::new(samples, DatasetSource::Synthetic)
}

/// Adds i.i.d. `N(0, sigma_bar^2 I)` noise to every column. `sigma_bar = 0`
/// returns the input bits unchanged.
pub fn add_noise<F: Scalar>(x: &Dataset<F>, sigma_bar: F, seed: u64) -> Result<Dataset<F>> {
    if sigma_bar < F::zero() {
        return Err(Error::arg("add_noise", "sigma_bar must be >= 0"));
    }
    if sigma_bar == F::zero() {
        return Ok(x.clone());
    }
    let d = x.dim();
    let n = x.len();
    let columns: Vec<Vec<F>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut rng = keyed_rng(seed, "noise", &[j as u64]);
            (0..d)
                .map(|i| x.samples().get(i, j) + sigma_bar * F::standard_normal(&mut rng))
                .collect()
        })
        .collect();
    let samples = Matrix::from_fn(d, n, |i, j| columns[j][i]);
    Dataset::new(samples, x.source())
}

/// Reads a dataset from an LDMX or CSV matrix file (columns are samples).
pub fn load_dataset<F: Scalar>(path: &Path) -> Result<Dataset<F>> {
    let samples = io::load_matrix(path)?;
    Dataset::new(samples, DatasetSource::File)
}

pub fn save_dataset<F: Scalar>(x: &Dataset<F>, path: &Path) -> Result<()> {
    io::save_matrix(x.samples(), path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigen::sym_eigen;

    type Spec64 = SpikedModelSpec<f64>;

    fn rank1_spec(d: usize, lambda: f64, latent: LatentDist, seed: u64) -> Spec64 {
        Spec64::random(d, vec![lambda], latent, seed).unwrap()
    }

    #[test]
    fn basis_is_orthonormal() {
        let b = random_orthonormal_basis::<f64>(3, 3, 5).unwrap();
        assert!(crate::eigen::orthonormality_residual(&b) <= 1e-10);
        let b2 = random_orthonormal_basis::<f64>(50, 5, 5).unwrap();
        assert!(crate::eigen::orthonormality_residual(&b2) <= 1e-10);
    }

    #[test]
    fn basis_seed_behavior() {
        let a = random_orthonormal_basis::<f64>(50, 5, 1).unwrap();
        let b = random_orthonormal_basis::<f64>(50, 5, 2).unwrap();
        let c = random_orthonormal_basis::<f64>(50, 5, 1).unwrap();
        assert_ne!(a.data(), b.data());
        assert_eq!(a.data(), c.data());
    }

    #[test]
    fn basis_rank_too_large() {
        assert!(random_orthonormal_basis::<f64>(3, 4, 0).is_err());
    }

    #[test]
    fn clean_samples_match_population_moments() {
        // rank-1, lambda = 2: variance along u0 is 4; nothing orthogonal.
        let spec = rank1_spec(20, 2.0, LatentDist::Gaussian, 11);
        let data = sample_clean(&spec, 100_000, 42).unwrap();
        let u0 = spec.component(0);
        let n = data.len();
        let mut sum_sq = 0.0;
        let mut orth_sq: f64 = 0.0;
        for j in 0..n {
            let col = data.samples().col(j);
            let c = dot(&col, &u0);
            sum_sq += c * c;
            let residual: f64 = col
                .iter()
                .zip(u0.iter())
                .map(|(x, u)| x - c * u)
                .map(|v| v * v)
                .sum();
            orth_sq = orth_sq.max(residual);
        }
        let var = sum_sq / n as f64;
        assert!((3.9..=4.1).contains(&var), "variance along u0 = {var}");
        assert!(orth_sq <= 1e-20, "orthogonal component {orth_sq}");
    }

    #[test]
    fn samples_lie_in_span() {
        let spec = Spec64::random(30, vec![3.0, 1.0], LatentDist::Gaussian, 3).unwrap();
        let data = sample_clean(&spec, 50, 9).unwrap();
        let b = spec.basis();
        for j in 0..data.len() {
            let col = data.samples().col(j);
            // subtract projection onto span(basis)
            let mut residual = col.clone();
            for i in 0..spec.rank() {
                let u = b.col(i);
                let c = dot(&col, &u);
                for (ri, ui) in residual.iter_mut().zip(u.iter()) {
                    *ri -= c * ui;
                }
            }
            assert!(norm2(&residual) <= 1e-10);
        }
    }

    #[test]
    fn rademacher_projection_is_unit() {
        let spec = rank1_spec(10, 1.0, LatentDist::Rademacher, 4);
        let data = sample_clean(&spec, 64, 8).unwrap();
        let u0 = spec.component(0);
        for j in 0..data.len() {
            let c = dot(&data.samples().col(j), &u0).abs();
            assert!((c - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn uniform_latent_has_unit_variance() {
        let spec = rank1_spec(8, 1.0, LatentDist::Uniform, 21);
        let data = sample_clean(&spec, 200_000, 7).unwrap();
        let u0 = spec.component(0);
        let var: f64 = (0..data.len())
            .map(|j| dot(&data.samples().col(j), &u0).powi(2))
            .sum::<f64>()
            / data.len() as f64;
        assert!((0.98..=1.02).contains(&var), "variance {var}");
    }

    #[test]
    fn zero_noise_is_identity() {
        let spec = rank1_spec(10, 1.0, LatentDist::Gaussian, 2);
        let data = sample_clean(&spec, 16, 3).unwrap();
        let noisy = add_noise(&data, 0.0, 77).unwrap();
        assert_eq!(data.samples().data(), noisy.samples().data());
    }

    #[test]
    fn noise_magnitude_matches_chi_square_moment() {
        // sigma = 1, d = 100: E ||noise column||^2 = 100.
        let spec = rank1_spec(100, 1.0, LatentDist::Gaussian, 5);
        let data = sample_clean(&spec, 10_000, 6).unwrap();
        let noisy = add_noise(&data, 1.0, 99).unwrap();
        let mut total = 0.0;
        for j in 0..data.len() {
            let a = data.samples().col(j);
            let b = noisy.samples().col(j);
            total += a
                .iter()
                .zip(b.iter())
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>();
        }
        let mean_sq = total / data.len() as f64;
        assert!((98.0..=102.0).contains(&mean_sq), "mean sq perturbation {mean_sq}");
    }

    #[test]
    fn noise_seeds_differ() {
        let spec = rank1_spec(10, 1.0, LatentDist::Gaussian, 2);
        let data = sample_clean(&spec, 16, 3).unwrap();
        let n1 = add_noise(&data, 0.5, 1).unwrap();
        let n2 = add_noise(&data, 0.5, 2).unwrap();
        assert_ne!(n1.samples().data(), n2.samples().data());
    }

    #[test]
    fn clean_samples_have_exact_rank() {
        let spec = Spec64::random(20, vec![2.0, 1.0, 0.5], LatentDist::Gaussian, 12).unwrap();
        let data = sample_clean(&spec, 200, 13).unwrap();
        let cov = data.samples().gram_scaled();
        let e = sym_eigen(&cov).unwrap();
        let top = e.eigenvalues()[0];
        for &v in &e.eigenvalues()[3..] {
            assert!(v.abs() <= 1e-10 * top, "trailing eigenvalue {v}");
        }
    }

    #[test]
    fn empirical_covariance_converges() {
        let spec = Spec64::random(20, vec![2.0, 1.0], LatentDist::Gaussian, 30).unwrap();
        let data = sample_clean(&spec, 100_000, 31).unwrap();
        let emp = data.samples().gram_scaled();
        let pop = spec.population_covariance();
        let rel = emp.sub(&pop).unwrap().frobenius_norm() / pop.frobenius_norm();
        assert!(rel <= 0.05, "relative covariance error {rel}");
    }

    #[test]
    fn shuffling_commutes_in_distribution() {
        // moment statistics, not bit equality: shuffled columns see
        // different noise bits but the same aggregate magnitude
        let spec = rank1_spec(50, 1.0, LatentDist::Gaussian, 8);
        let data = sample_clean(&spec, 4000, 9).unwrap();
        let shuffled = {
            let n = data.len();
            let m = Matrix::from_fn(data.dim(), n, |i, j| data.samples().get(i, (j + n / 2) % n));
            Dataset::new(m, DatasetSource::Synthetic).unwrap()
        };
        let a = add_noise(&data, 0.7, 123).unwrap();
        let b = add_noise(&shuffled, 0.7, 123).unwrap();
        let mean_sq = |clean: &Dataset<f64>, noisy: &Dataset<f64>| {
            let mut t = 0.0;
            for j in 0..clean.len() {
                let x = clean.samples().col(j);
                let y = noisy.samples().col(j);
                t += x.iter().zip(y.iter()).map(|(p, q)| (p - q) * (p - q)).sum::<f64>();
            }
            t / clean.len() as f64
        };
        let ma = mean_sq(&data, &a);
        let mb = mean_sq(&shuffled, &b);
        assert!((ma - mb).abs() / ma < 0.05, "{ma} vs {mb}");
    }

    #[test]
    fn dataset_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let spec = rank1_spec(6, 1.0, LatentDist::Gaussian, 2);
        let data = sample_clean(&spec, 5, 3).unwrap();
        let path = dir.path().join("data.ldmx");
        save_dataset(&data, &path).unwrap();
        let back: Dataset<f64> = load_dataset(&path).unwrap();
        assert_eq!(back.source(), DatasetSource::File);
        assert_eq!(back.samples().data(), data.samples().data());
    }

    #[test]
    fn negative_sigma_rejected() {
        let spec = rank1_spec(4, 1.0, LatentDist::Gaussian, 2);
        let data = sample_clean(&spec, 4, 3).unwrap();
        assert!(add_noise(&data, -0.1, 0).is_err());
    }

    #[test]
    fn too_few_samples_rejected() {
        let spec = rank1_spec(4, 1.0, LatentDist::Gaussian, 2);
        assert!(sample_clean(&spec, 1, 3).is_err());
    }

    #[test]
    fn model_validation() {
        // ascending lambdas
        assert!(Spec64::random(5, vec![1.0, 2.0], LatentDist::Gaussian, 0).is_err());
        // non-positive lambdas
        assert!(Spec64::random(5, vec![1.0, 0.0], LatentDist::Gaussian, 0).is_err());
        // rank above dimension
        assert!(Spec64::random(2, vec![3.0, 2.0, 1.0], LatentDist::Gaussian, 0).is_err());
    }

    #[test]
    fn centered_removes_row_means() {
        let m = Matrix::new(2, 3, vec![1.0, 2.0, 3.0, -1.0, 0.0, 1.0]).unwrap();
        let c = Dataset::new(m, DatasetSource::Synthetic).unwrap().centered();
        for i in 0..2 {
            let mean: f64 = c.samples().row(i).iter().sum::<f64>() / 3.0;
            assert!(mean.abs() < 1e-14);
        }
    }
}
