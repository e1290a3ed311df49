//! PCA denoiser chains: training and the two reverse-process samplers.
//!
//! Training: for every timestep `t` of a noise schedule, corrupt the clean
//! dataset to its cumulative level `sigma_bar_t`, diagonalize the sample
//! covariance of the corrupted data, and keep the leading `r` eigenvectors
//! `U_t`. The step-`t` denoiser is the orthogonal projection
//! `P_t = U_t U_tᵀ`.
//!
//! Generation applies the projections from the noisiest level down to the
//! clean one, `P_0 P_1 ... P_T xi`, either to a fixed input (deterministic
//! sampler) or while injecting fresh Gaussian noise before each projection
//! (stochastic sampler).

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigen;
use crate::error::{Error, Result};
use crate::io;
use crate::matrix::Matrix;
use crate::rng::{derive_seed, keyed_rng};
use crate::scalar::Scalar;
use crate::schedule::{NoiseSchedule, ScheduleKind};
use crate::spiked::{add_noise, Dataset, SpikedModelSpec};

/// How training noise relates across timesteps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseCoupling {
    /// Independent corruption per timestep, drawn at the cumulative level.
    #[default]
    Fresh,
    /// One Brownian path: level `t` extends the noise of level `t - 1` by
    /// an increment of standard deviation `sigma_t`.
    Coupled,
}

#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    pub coupling: NoiseCoupling,
    /// Subtract the per-feature mean of the corrupted data before the
    /// covariance. Off by default.
    pub center: bool,
}

/// The learned basis at one noise level.
#[derive(Debug, Clone)]
pub struct PcaDenoiser<F> {
    t: usize,
    sigma_bar: F,
    basis: Matrix<F>,
    eigenvalues: Vec<F>,
}

impl<F: Scalar> PcaDenoiser<F> {
    pub fn t(&self) -> usize {
        self.t
    }

    pub fn sigma_bar(&self) -> F {
        self.sigma_bar
    }

    /// `d x r` matrix of the leading eigenvectors at this level.
    pub fn basis(&self) -> &Matrix<F> {
        &self.basis
    }

    /// Leading `r` eigenvalues of the sample covariance at this level.
    pub fn eigenvalues(&self) -> &[F] {
        &self.eigenvalues
    }

    pub fn dim(&self) -> usize {
        self.basis.rows()
    }

    pub fn rank(&self) -> usize {
        self.basis.cols()
    }

    /// The explicit projection matrix `P = U Uᵀ`.
    pub fn projection(&self) -> Matrix<F> {
        self.basis
            .matmul(&self.basis.transpose())
            .expect("shapes agree")
    }

    /// Applies the projection to a batch (columns) without materializing
    /// the `d x d` matrix: `U (Uᵀ X)`.
    pub fn apply(&self, x: &Matrix<F>) -> Result<Matrix<F>> {
        let coords = self.basis.transpose().matmul(x)?;
        self.basis.matmul(&coords)
    }
}

/// Serialized chain metadata (schedule, shapes, seeds).
#[derive(Debug, Serialize, Deserialize)]
struct ChainManifest {
    dim: usize,
    rank: usize,
    n_samples: usize,
    train_seed: u64,
    schedule_kind: String,
    sigmas: Vec<f64>,
    centered: bool,
}

/// Ordered PCA denoisers for `t = 0..=T` plus the schedule they were
/// trained on.
#[derive(Debug, Clone)]
pub struct DenoiserChain<F> {
    denoisers: Vec<PcaDenoiser<F>>,
    schedule: NoiseSchedule<F>,
    rank: usize,
    train_seed: u64,
    n_samples: usize,
    centered: bool,
}

impl<F: Scalar> DenoiserChain<F> {
    pub fn denoisers(&self) -> &[PcaDenoiser<F>] {
        &self.denoisers
    }

    pub fn denoiser(&self, t: usize) -> &PcaDenoiser<F> {
        &self.denoisers[t]
    }

    pub fn schedule(&self) -> &NoiseSchedule<F> {
        &self.schedule
    }

    pub fn t_max(&self) -> usize {
        self.denoisers.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.denoisers[0].dim()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn train_seed(&self) -> u64 {
        self.train_seed
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn centered(&self) -> bool {
        self.centered
    }
}

/// Trains one denoiser per schedule level. Level `t` sees the clean data
/// corrupted by noise at the cumulative level `sigma_bar_t` (level 0 of the
/// built-in schedules is the clean data itself). Noise is keyed by
/// `(seed, t)`, so levels are independent and may be trained in parallel
/// without changing the result.
pub fn train_chain<F: Scalar>(
    x0: &Dataset<F>,
    schedule: &NoiseSchedule<F>,
    rank: usize,
    seed: u64,
) -> Result<DenoiserChain<F>> {
    train_chain_with(x0, schedule, rank, seed, &TrainOptions::default())
}

pub fn train_chain_with<F: Scalar>(
    x0: &Dataset<F>,
    schedule: &NoiseSchedule<F>,
    rank: usize,
    seed: u64,
    options: &TrainOptions,
) -> Result<DenoiserChain<F>> {
    let d = x0.dim();
    let n = x0.len();
    if rank == 0 || rank > d.min(n) {
        return Err(Error::dim(
            "train_chain",
            format!("rank {rank} out of range 1..={}", d.min(n)),
        ));
    }

    let denoisers: Vec<Result<PcaDenoiser<F>>> = match options.coupling {
        NoiseCoupling::Fresh => (0..=schedule.t_max())
            .into_par_iter()
            .map(|t| {
                let noisy = add_noise(x0, schedule.sigma_bar(t), derive_seed(seed, "train", &[t as u64]))?;
                fit_level(&noisy, rank, t, schedule.sigma_bar(t), options.center)
            })
            .collect(),
        NoiseCoupling::Coupled => {
            // one shared Brownian path: accumulate per-step increments
            let mut path = x0.clone();
            let mut out = Vec::with_capacity(schedule.t_max() + 1);
            for t in 0..=schedule.t_max() {
                path = add_noise(&path, schedule.sigma(t), derive_seed(seed, "train-step", &[t as u64]))?;
                out.push(fit_level(&path, rank, t, schedule.sigma_bar(t), options.center));
            }
            out
        }
    };

    let denoisers = denoisers.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(DenoiserChain {
        denoisers,
        schedule: schedule.clone(),
        rank,
        train_seed: seed,
        n_samples: n,
        centered: options.center,
    })
}

/// Trains against the population covariance `Sigma_0 + sigma_bar^2 I`
/// instead of sampled data — the infinite-data limit. Deterministic and
/// noise-free; the learned bases equal the model basis exactly (up to the
/// eigensolver's own error) because an isotropic shift preserves
/// eigenvectors.
pub fn train_chain_population<F: Scalar>(
    spec: &SpikedModelSpec<F>,
    schedule: &NoiseSchedule<F>,
    rank: usize,
) -> Result<DenoiserChain<F>> {
    let d = spec.dim();
    if rank == 0 || rank > d {
        return Err(Error::dim(
            "train_chain_population",
            format!("rank {rank} out of range 1..={d}"),
        ));
    }
    let base = spec.population_covariance();
    let denoisers: Vec<Result<PcaDenoiser<F>>> = (0..=schedule.t_max())
        .into_par_iter()
        .map(|t| {
            let sb = schedule.sigma_bar(t);
            let mut cov = base.clone();
            for i in 0..d {
                let v = cov.get(i, i) + sb * sb;
                cov.set(i, i, v);
            }
            let e = eigen::sym_eigen(&cov)?;
            Ok(PcaDenoiser {
                t,
                sigma_bar: sb,
                basis: e.leading_basis(rank)?,
                eigenvalues: e.eigenvalues()[..rank].to_vec(),
            })
        })
        .collect();
    let denoisers = denoisers.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(DenoiserChain {
        denoisers,
        schedule: schedule.clone(),
        rank,
        train_seed: 0,
        n_samples: 0,
        centered: false,
    })
}

fn fit_level<F: Scalar>(
    noisy: &Dataset<F>,
    rank: usize,
    t: usize,
    sigma_bar: F,
    center: bool,
) -> Result<PcaDenoiser<F>> {
    let data = if center { noisy.centered() } else { noisy.clone() };
    let cov = data.samples().gram_scaled();
    let e = eigen::sym_eigen(&cov)?;
    Ok(PcaDenoiser {
        t,
        sigma_bar,
        basis: e.leading_basis(rank)?,
        eigenvalues: e.eigenvalues()[..rank].to_vec(),
    })
}

/// Deterministic sampler: applies `P_T`, then `P_{T-1}`, ..., then `P_0`
/// to the columns of `xi`.
pub fn generate_deterministic<F: Scalar>(
    chain: &DenoiserChain<F>,
    xi: &Matrix<F>,
) -> Result<Matrix<F>> {
    if xi.rows() != chain.dim() {
        return Err(Error::dim(
            "generate_deterministic",
            format!("input dimension {} != chain dimension {}", xi.rows(), chain.dim()),
        ));
    }
    let mut y = xi.clone();
    for t in (0..=chain.t_max()).rev() {
        y = chain.denoiser(t).apply(&y)?;
    }
    Ok(y)
}

/// The default injection magnitudes: a unit draw at the top level and
/// `sqrt(1/T)` at every intermediate one.
pub fn default_injection<F: Scalar>(t_max: usize) -> Vec<F> {
    let small = if t_max == 0 {
        F::zero()
    } else {
        (F::one() / crate::matrix::cast_usize::<F>(t_max)).sqrt()
    };
    let mut e = vec![small; t_max + 1];
    e[t_max] = F::one();
    e
}

/// Stochastic sampler: runs `y <- P_t (y + xi_t)` from `t = T` down to 0,
/// starting from `y = 0`, with `xi_t ~ N(0, magnitudes[t]^2 I)` keyed by
/// `(seed, sample, t)`. Expanding the recursion gives the sum of partially
/// projected injections `sum_t (P_0 ... P_t) xi_t`.
pub fn generate_with_noise<F: Scalar>(
    chain: &DenoiserChain<F>,
    magnitudes: &[F],
    n_samples: usize,
    seed: u64,
) -> Result<Matrix<F>> {
    if magnitudes.len() != chain.t_max() + 1 {
        return Err(Error::dim(
            "generate_with_noise",
            format!(
                "{} magnitudes for a chain with {} levels",
                magnitudes.len(),
                chain.t_max() + 1
            ),
        ));
    }
    if magnitudes.iter().any(|&e| e < F::zero()) {
        return Err(Error::arg(
            "generate_with_noise",
            "injection magnitudes must be >= 0",
        ));
    }
    if n_samples == 0 {
        return Err(Error::arg("generate_with_noise", "need n_samples >= 1"));
    }
    let d = chain.dim();
    let columns: Vec<Result<Vec<F>>> = (0..n_samples)
        .into_par_iter()
        .map(|j| {
            let mut y = Matrix::zeros(d, 1);
            for t in (0..=chain.t_max()).rev() {
                let e_t = magnitudes[t];
                if e_t > F::zero() {
                    let mut rng = keyed_rng(seed, "inject", &[j as u64, t as u64]);
                    for i in 0..d {
                        let v = y.get(i, 0) + e_t * F::standard_normal(&mut rng);
                        y.set(i, 0, v);
                    }
                }
                y = chain.denoiser(t).apply(&y)?;
            }
            Ok(y.col(0))
        })
        .collect();
    let columns = columns.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(Matrix::from_fn(d, n_samples, |i, j| columns[j][i]))
}

/// The explicit `d x d` operator `P_0 ... P_t_stop` of the deterministic
/// sampler (full chain when `t_stop` is `None`).
pub fn chain_operator<F: Scalar>(
    chain: &DenoiserChain<F>,
    t_stop: Option<usize>,
) -> Result<Matrix<F>> {
    let t_stop = t_stop.unwrap_or(chain.t_max());
    if t_stop > chain.t_max() {
        return Err(Error::dim(
            "chain_operator",
            format!("t_stop {} exceeds T = {}", t_stop, chain.t_max()),
        ));
    }
    let mut op = chain.denoiser(t_stop).projection();
    for t in (0..t_stop).rev() {
        op = chain.denoiser(t).apply(&op)?;
    }
    Ok(op)
}

/// Writes a chain as a directory: `U_{t}.ldmx` bases, `eig_{t}.csv`
/// eigenvalue columns, and a `manifest.json`.
pub fn save_chain<F: Scalar>(chain: &DenoiserChain<F>, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    for den in chain.denoisers() {
        io::save_ldmx(den.basis(), &dir.join(format!("U_{}.ldmx", den.t())))?;
        let eig = Matrix::from_fn(den.rank(), 1, |i, _| den.eigenvalues()[i]);
        io::save_csv_matrix(&eig, &dir.join(format!("eig_{}.csv", den.t())))?;
    }
    let manifest = ChainManifest {
        dim: chain.dim(),
        rank: chain.rank(),
        n_samples: chain.n_samples(),
        train_seed: chain.train_seed(),
        schedule_kind: match chain.schedule().kind() {
            ScheduleKind::Constant => "constant".into(),
            ScheduleKind::Linear => "linear".into(),
            ScheduleKind::Custom => "custom".into(),
        },
        sigmas: chain
            .schedule()
            .sigmas()
            .iter()
            .map(|s| s.to_f64().unwrap_or(f64::NAN))
            .collect(),
        centered: chain.centered(),
    };
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::format(path.display().to_string(), e.to_string()))?;
    std::fs::write(&path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn load_chain<F: Scalar>(dir: &Path) -> Result<DenoiserChain<F>> {
    let manifest_path = dir.join("manifest.json");
    let text = std::fs::read_to_string(&manifest_path)
        .map_err(|e| Error::io(manifest_path.display().to_string(), e))?;
    let manifest: ChainManifest = serde_json::from_str(&text)
        .map_err(|e| Error::format(manifest_path.display().to_string(), e.to_string()))?;

    let sigmas: Vec<F> = manifest
        .sigmas
        .iter()
        .map(|&s| F::from_f64(s).ok_or(Error::NonFinite("load_chain")))
        .collect::<Result<Vec<_>>>()?;
    let schedule = NoiseSchedule::custom(sigmas)?;

    let mut denoisers = Vec::with_capacity(schedule.t_max() + 1);
    for t in 0..=schedule.t_max() {
        let basis: Matrix<F> = io::load_ldmx(&dir.join(format!("U_{t}.ldmx")))?;
        let eig: Matrix<F> = io::load_csv_matrix(&dir.join(format!("eig_{t}.csv")))?;
        if basis.rows() != manifest.dim || basis.cols() != manifest.rank {
            return Err(Error::format(
                dir.display().to_string(),
                format!("U_{t}.ldmx has wrong shape"),
            ));
        }
        denoisers.push(PcaDenoiser {
            t,
            sigma_bar: schedule.sigma_bar(t),
            basis,
            eigenvalues: eig.col(0),
        });
    }
    Ok(DenoiserChain {
        denoisers,
        schedule,
        rank: manifest.rank,
        train_seed: manifest.train_seed,
        n_samples: manifest.n_samples,
        centered: manifest.centered,
    })
}

/// Sines of the principal angles between the column spans of `u` and `v`
/// (both with orthonormal columns). Computed from the residual of `v`
/// after projection onto `span(u)`, which stays accurate for tiny angles
/// where the cosine route loses half the significant digits.
pub fn principal_angle_sines<F: Scalar>(u: &Matrix<F>, v: &Matrix<F>) -> Result<Vec<F>> {
    let coords = u.transpose().matmul(v)?;
    let projected = u.matmul(&coords)?;
    let residual = v.sub(&projected)?;
    let gram = residual.transpose().matmul(&residual)?;
    let e = eigen::sym_eigen(&gram)?;
    Ok(e.eigenvalues()
        .iter()
        .map(|&x| x.max(F::zero()).sqrt().min(F::one()))
        .collect())
}

/// Draws the standard-normal seed batch `xi` (scaled by `magnitude`) used
/// by the deterministic sampler; keyed identically to the top-level
/// injection of [`generate_with_noise`].
pub fn sample_xi<F: Scalar>(
    d: usize,
    n_samples: usize,
    magnitude: F,
    t_max: usize,
    seed: u64,
) -> Matrix<F> {
    let columns: Vec<Vec<F>> = (0..n_samples)
        .map(|j| {
            let mut rng = keyed_rng(seed, "inject", &[j as u64, t_max as u64]);
            (0..d).map(|_| magnitude * F::standard_normal(&mut rng)).collect()
        })
        .collect();
    Matrix::from_fn(d, n_samples, |i, j| columns[j][i])
}
