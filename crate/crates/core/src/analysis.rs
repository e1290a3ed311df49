//! Diagnostics of the denoiser chain and of generated samples.
//!
//! * [`angle_profile`] — Monte Carlo table of `E sin(theta)` between each
//!   learned component and its clean counterpart, per noise level. For
//!   rank-1 spikes this decays like `(sigma_bar / lambda) * sqrt(d / n)`,
//!   and larger eigenvalues hold their alignment to higher noise levels.
//! * [`basis_correlations`] — the consecutive-basis overlap matrices
//!   `U_tᵀ U_{t+1}` and their running product, which collapses onto the
//!   leading component as the chain grows.
//! * [`spectrum_report`] — presence coefficients `c_i`, the mean of
//!   `|<u_i, x>| / ||x||` over generated samples.
//! * [`power_iteration`] — the baseline the deterministic chain converges
//!   to in mean.

use rayon::prelude::*;

use crate::diffusion::{train_chain_population, train_chain_with, DenoiserChain, TrainOptions};
use crate::error::{Error, Result};
use crate::matrix::{cast, dot, norm2, Matrix};
use crate::rng::{derive_seed, keyed_rng};
use crate::scalar::Scalar;
use crate::schedule::NoiseSchedule;
use crate::spiked::{sample_clean, SpikedModelSpec};
use crate::{eigen, matrix};

/// How learned components are paired with the clean components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ComponentMatching {
    /// Pair by eigenvalue rank: learned column `i` with clean `u_i`.
    #[default]
    Index,
    /// Greedy pairing by maximal absolute correlation, for diagnosing
    /// index swaps near eigenvalue crossings.
    Greedy,
}

/// `sqrt(1 - <u, v>^2)`, the sine of the angle between two unit vectors.
/// Invariant under sign flips of either argument.
pub fn sin_theta<F: Scalar>(u: &[F], v: &[F]) -> Result<F> {
    let tol = cast::<F>(1e-8).max(F::epsilon() * cast::<F>(100.0));
    for (name, w) in [("u", u), ("v", v)] {
        let n = norm2(w);
        if (n - F::one()).abs() > tol {
            return Err(Error::arg(
                "sin_theta",
                format!("{name} is not unit-norm (|{n}| - 1 exceeds tolerance)"),
            ));
        }
    }
    let c = matrix::inner(u, v)?;
    Ok((F::one() - c * c).max(F::zero()).sqrt())
}

/// Monte Carlo angle table: rows are component indices, columns are the
/// schedule's cumulative noise levels.
#[derive(Debug, Clone)]
pub struct AngleProfile<F> {
    pub indices: Vec<usize>,
    pub noise_levels: Vec<F>,
    /// `sin_theta[i][t]`, averaged over trials.
    pub sin_theta: Vec<Vec<F>>,
    /// Standard error of each table entry.
    pub stderr: Vec<Vec<F>>,
    pub trials: usize,
}

impl<F: Scalar> AngleProfile<F> {
    /// Mean angle for component `index` at schedule level `t`.
    pub fn value(&self, index: usize, t: usize) -> F {
        self.sin_theta[index][t]
    }

    pub fn stderr_at(&self, index: usize, t: usize) -> F {
        self.stderr[index][t]
    }
}

#[derive(Debug, Clone)]
pub struct AngleProfileOptions {
    pub matching: ComponentMatching,
    /// Use the population covariance instead of sampled data (the
    /// infinite-data limit; deterministic, one evaluation).
    pub population: bool,
    pub train: TrainOptions,
}

impl Default for AngleProfileOptions {
    fn default() -> Self {
        AngleProfileOptions {
            matching: ComponentMatching::Index,
            population: false,
            train: TrainOptions::default(),
        }
    }
}

/// Trains `trials` independent chains and averages the per-level angles
/// between learned and clean components.
///
/// Trial `k` draws its data and training noise from streams keyed by
/// `(seed, k)`, so results are independent of evaluation order and thread
/// count; aggregation runs in fixed trial order with compensated sums.
pub fn angle_profile<F: Scalar>(
    spec: &SpikedModelSpec<F>,
    schedule: &NoiseSchedule<F>,
    n: usize,
    rank: usize,
    trials: usize,
    seed: u64,
    options: &AngleProfileOptions,
) -> Result<AngleProfile<F>> {
    if trials == 0 {
        return Err(Error::arg("angle_profile", "need trials >= 1"));
    }
    let k = rank.min(spec.rank());
    let levels = schedule.cumulative().to_vec();
    let n_levels = levels.len();

    let per_trial: Vec<Result<Vec<Vec<F>>>> = if options.population {
        let chain = train_chain_population(spec, schedule, rank)?;
        vec![measure_angles(&chain, spec, k, options.matching)]
    } else {
        (0..trials as u64)
            .into_par_iter()
            .map(|trial| {
                let data = sample_clean(spec, n, derive_seed(seed, "trial-data", &[trial]))?;
                let chain = train_chain_with(
                    &data,
                    schedule,
                    rank,
                    derive_seed(seed, "trial-train", &[trial]),
                    &options.train,
                )?;
                measure_angles(&chain, spec, k, options.matching)
            })
            .collect()
    };
    let per_trial = per_trial.into_iter().collect::<Result<Vec<_>>>()?;
    let effective_trials = per_trial.len();

    let mut sin_table = vec![vec![F::zero(); n_levels]; k];
    let mut err_table = vec![vec![F::zero(); n_levels]; k];
    for i in 0..k {
        for t in 0..n_levels {
            let samples: Vec<F> = per_trial.iter().map(|m| m[i][t]).collect();
            let (mean, stderr) = mean_and_stderr(&samples);
            sin_table[i][t] = mean;
            err_table[i][t] = stderr;
        }
    }

    Ok(AngleProfile {
        indices: (0..k).collect(),
        noise_levels: levels,
        sin_theta: sin_table,
        stderr: err_table,
        trials: effective_trials,
    })
}

fn measure_angles<F: Scalar>(
    chain: &DenoiserChain<F>,
    spec: &SpikedModelSpec<F>,
    k: usize,
    matching: ComponentMatching,
) -> Result<Vec<Vec<F>>> {
    let n_levels = chain.t_max() + 1;
    let mut table = vec![vec![F::zero(); n_levels]; k];
    for (t, denoiser) in chain.denoisers().iter().enumerate().take(n_levels) {
        let basis = denoiser.basis();
        let pairing = match_components(basis, spec, k, matching);
        for (i, &j) in pairing.iter().enumerate() {
            let learned = basis.col(j);
            let truth = spec.component(i);
            table[i][t] = sin_theta(&learned, &truth)?;
        }
    }
    Ok(table)
}

/// Returns, for each clean component `i < k`, the learned column paired
/// with it.
fn match_components<F: Scalar>(
    basis: &Matrix<F>,
    spec: &SpikedModelSpec<F>,
    k: usize,
    matching: ComponentMatching,
) -> Vec<usize> {
    match matching {
        ComponentMatching::Index => (0..k).collect(),
        ComponentMatching::Greedy => {
            let r = basis.cols();
            let mut used = vec![false; r];
            let mut pairing = Vec::with_capacity(k);
            for i in 0..k {
                let truth = spec.component(i);
                let mut best = None;
                let mut best_corr = -F::one();
                for (j, used_j) in used.iter().enumerate() {
                    if *used_j {
                        continue;
                    }
                    let corr = dot(&basis.col(j), &truth).abs();
                    if corr > best_corr {
                        best_corr = corr;
                        best = Some(j);
                    }
                }
                let j = best.expect("k <= r guarantees a free column");
                used[j] = true;
                pairing.push(j);
            }
            pairing
        }
    }
}

/// Consecutive-basis overlap at one timestep.
#[derive(Debug, Clone)]
pub struct BasisCorrelation<F> {
    pub t: usize,
    /// `U_tᵀ U_{t+1}` (r x r).
    pub matrix: Matrix<F>,
    /// Running product of the overlaps up to and including `t`.
    pub partial: Matrix<F>,
}

impl<F: Scalar> BasisCorrelation<F> {
    /// Off-diagonal energy over diagonal energy of the step matrix.
    pub fn diagonality_score(&self) -> F {
        diagonality_score(&self.matrix)
    }

    pub fn partial_diagonality_score(&self) -> F {
        diagonality_score(&self.partial)
    }

    /// Share of the partial product's squared Frobenius norm carried by
    /// its (0, 0) entry.
    pub fn partial_leading_energy(&self) -> F {
        let e00 = self.partial.get(0, 0);
        let total = self.partial.frobenius_norm();
        if total == F::zero() {
            return F::zero();
        }
        (e00 * e00) / (total * total)
    }
}

fn diagonality_score<F: Scalar>(m: &Matrix<F>) -> F {
    let mut diag = F::zero();
    let mut off = F::zero();
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            let v = m.get(i, j);
            if i == j {
                diag += v * v;
            } else {
                off += v * v;
            }
        }
    }
    if diag == F::zero() {
        F::infinity()
    } else {
        off / diag
    }
}

/// Overlap matrices `U_tᵀ U_{t+1}` for every consecutive pair, together
/// with the running partial products.
pub fn basis_correlations<F: Scalar>(chain: &DenoiserChain<F>) -> Result<Vec<BasisCorrelation<F>>> {
    if chain.t_max() < 1 {
        return Err(Error::arg(
            "basis_correlations",
            "chain must have at least two levels",
        ));
    }
    let mut out = Vec::with_capacity(chain.t_max());
    let mut partial = Matrix::identity(chain.rank());
    for t in 0..chain.t_max() {
        let step = chain
            .denoiser(t)
            .basis()
            .transpose()
            .matmul(chain.denoiser(t + 1).basis())?;
        partial = partial.matmul(&step)?;
        out.push(BasisCorrelation {
            t,
            matrix: step,
            partial: partial.clone(),
        });
    }
    Ok(out)
}

/// Presence of each clean component in a sample set.
#[derive(Debug, Clone)]
pub struct SpectrumReport<F> {
    /// `c[i]`: mean of `|<u_i, x>| / ||x||` over samples.
    pub c: Vec<F>,
    /// Per-index standard deviation across samples.
    pub std: Vec<F>,
    pub n_samples: usize,
    /// Zero-norm columns that were skipped.
    pub skipped: usize,
}

/// Spectral presence coefficients of `samples` (columns) against the
/// model's clean components.
pub fn spectrum_report<F: Scalar>(
    samples: &Matrix<F>,
    spec: &SpikedModelSpec<F>,
) -> Result<SpectrumReport<F>> {
    spectrum_report_basis(samples, spec.basis())
}

/// Same, against an arbitrary reference basis (columns are the reference
/// components) — used when the reference comes from data rather than a
/// known model.
pub fn spectrum_report_basis<F: Scalar>(
    samples: &Matrix<F>,
    basis: &Matrix<F>,
) -> Result<SpectrumReport<F>> {
    if samples.rows() != basis.rows() {
        return Err(Error::dim(
            "spectrum_report",
            format!(
                "samples are {}-dimensional, basis is {}",
                samples.rows(),
                basis.rows()
            ),
        ));
    }
    let r = basis.cols();
    let mut per_index: Vec<Vec<F>> = vec![Vec::with_capacity(samples.cols()); r];
    let mut skipped = 0usize;
    for j in 0..samples.cols() {
        let x = samples.col(j);
        let nx = norm2(&x);
        if nx == F::zero() {
            skipped += 1;
            continue;
        }
        for (i, bucket) in per_index.iter_mut().enumerate() {
            let u = basis.col(i);
            bucket.push(dot(&u, &x).abs() / nx);
        }
    }
    let kept = samples.cols() - skipped;
    if kept == 0 {
        return Err(Error::EmptyReport);
    }
    let mut c = Vec::with_capacity(r);
    let mut std = Vec::with_capacity(r);
    for bucket in &per_index {
        let (mean, sd) = mean_and_std(bucket);
        c.push(mean);
        std.push(sd);
    }
    Ok(SpectrumReport {
        c,
        std,
        n_samples: kept,
        skipped,
    })
}

/// Repeated multiply-and-normalize; converges to the leading eigenvector
/// when the spectral gap is positive. If a start vector is annihilated,
/// restarts with a fresh seeded draw, at most 5 times.
pub fn power_iteration<F: Scalar>(a: &Matrix<F>, iters: usize, seed: u64) -> Result<Vec<F>> {
    if !a.is_square() {
        return Err(Error::dim(
            "power_iteration",
            format!("matrix is {}x{}", a.rows(), a.cols()),
        ));
    }
    if iters == 0 {
        return Err(Error::arg("power_iteration", "need iters >= 1"));
    }
    let d = a.rows();
    let floor = F::min_positive_value().sqrt();
    const MAX_RESTARTS: usize = 5;
    for restart in 0..=MAX_RESTARTS {
        let mut rng = keyed_rng(seed, "power-start", &[restart as u64]);
        let mut v: Vec<F> = (0..d).map(|_| F::standard_normal(&mut rng)).collect();
        let nv = norm2(&v);
        for x in v.iter_mut() {
            *x /= nv;
        }
        let mut annihilated = false;
        for _ in 0..iters {
            let w = a.matvec(&v)?;
            let nw = norm2(&w);
            if nw < floor {
                annihilated = true;
                break;
            }
            let inv = F::one() / nw;
            v = w.into_iter().map(|x| x * inv).collect();
        }
        if !annihilated {
            return Ok(v);
        }
    }
    Err(Error::PowerIterationBreakdown {
        restarts: MAX_RESTARTS,
    })
}

/// `(1/m) sum_j x_j x_jᵀ` over sample columns.
pub fn generated_covariance<F: Scalar>(samples: &Matrix<F>) -> Matrix<F> {
    samples.gram_scaled()
}

/// Absolute inner product between the leading eigenvector of the sample
/// covariance and a unit reference direction.
pub fn alignment<F: Scalar>(samples: &Matrix<F>, reference: &[F]) -> Result<F> {
    let tol = cast::<F>(1e-8).max(F::epsilon() * cast::<F>(100.0));
    if (norm2(reference) - F::one()).abs() > tol {
        return Err(Error::arg("alignment", "reference must be unit-norm"));
    }
    let cov = generated_covariance(samples);
    let e = eigen::sym_eigen(&cov)?;
    let lead = e.eigenvector(0);
    Ok(matrix::inner(&lead, reference)?.abs())
}

/// Compensated (Kahan) sum; keeps aggregation independent of grouping to
/// well below the crate's reporting tolerances.
pub fn kahan_sum<F: Scalar>(values: impl IntoIterator<Item = F>) -> F {
    let mut sum = F::zero();
    let mut carry = F::zero();
    for v in values {
        let y = v - carry;
        let t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    sum
}

/// Mean and standard error (sample std over sqrt(n)).
pub fn mean_and_stderr<F: Scalar>(values: &[F]) -> (F, F) {
    let (mean, sd) = mean_and_std(values);
    let n = crate::matrix::cast_usize::<F>(values.len());
    (mean, sd / n.sqrt())
}

/// Mean and sample standard deviation (n - 1 normalization).
pub fn mean_and_std<F: Scalar>(values: &[F]) -> (F, F) {
    let n = values.len();
    if n == 0 {
        return (F::zero(), F::zero());
    }
    let nf = crate::matrix::cast_usize::<F>(n);
    let mean = kahan_sum(values.iter().copied()) / nf;
    if n == 1 {
        return (mean, F::zero());
    }
    let ss = kahan_sum(values.iter().map(|&v| (v - mean) * (v - mean)));
    let sd = (ss / (nf - F::one())).max(F::zero()).sqrt();
    (mean, sd)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::train_chain;
    use crate::schedule::ScheduleKind;
    use crate::spiked::{random_orthonormal_basis, LatentDist};
    use crate::Matrix64;

    type Spec64 = SpikedModelSpec<f64>;

    #[test]
    fn sin_theta_basics() {
        let u = vec![1.0, 0.0, 0.0];
        let v = vec![0.0, 1.0, 0.0];
        assert_eq!(sin_theta(&u, &u).unwrap(), 0.0);
        assert_eq!(sin_theta(&u, &v).unwrap(), 1.0);
        let w = vec![-1.0, 0.0, 0.0];
        assert_eq!(sin_theta(&u, &w).unwrap(), sin_theta(&u, &u).unwrap());
        assert!(sin_theta(&[2.0, 0.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn sin_theta_sign_invariance_both_args() {
        let b = random_orthonormal_basis::<f64>(7, 2, 3).unwrap();
        let u = b.col(0);
        let mut mix: Vec<f64> = u
            .iter()
            .zip(b.col(1).iter())
            .map(|(a, c)| 0.8 * a + 0.6 * c)
            .collect();
        let n = norm2(&mix);
        for x in mix.iter_mut() {
            *x /= n;
        }
        let s = sin_theta(&u, &mix).unwrap();
        let neg: Vec<f64> = mix.iter().map(|x| -x).collect();
        assert!((sin_theta(&u, &neg).unwrap() - s).abs() < 1e-15);
        assert!((0.0..=1.0).contains(&s));
        assert!((s - 0.6).abs() < 1e-12);
    }

    #[test]
    fn spectrum_of_pure_component() {
        let spec = Spec64::random(10, vec![2.0, 1.0], LatentDist::Gaussian, 5).unwrap();
        let u0 = spec.component(0);
        let samples = Matrix64::from_fn(10, 8, |i, _| u0[i]);
        let report = spectrum_report(&samples, &spec).unwrap();
        assert!((report.c[0] - 1.0).abs() < 1e-12);
        assert!(report.c[1].abs() < 1e-12);
        assert_eq!(report.n_samples, 8);
        assert_eq!(report.skipped, 0);
    }

    #[test]
    fn spectrum_uniform_on_circle_matches_expected_abs_cosine() {
        // x = cos(phi) u0 + sin(phi) u1 with phi uniform: E|cos| = 2/pi
        let spec = Spec64::random(16, vec![2.0, 1.0], LatentDist::Gaussian, 6).unwrap();
        let m = 20_000;
        let u0 = spec.component(0);
        let u1 = spec.component(1);
        let mut rng = keyed_rng(77, "circle", &[]);
        let samples = {
            let phis: Vec<f64> = (0..m)
                .map(|_| {
                    use rand::Rng;
                    rng.gen::<f64>() * std::f64::consts::TAU
                })
                .collect();
            Matrix64::from_fn(16, m, |i, j| phis[j].cos() * u0[i] + phis[j].sin() * u1[i])
        };
        let report = spectrum_report(&samples, &spec).unwrap();
        let want = 2.0 / std::f64::consts::PI;
        for i in 0..2 {
            let se = report.std[i] / (report.n_samples as f64).sqrt();
            assert!(
                (report.c[i] - want).abs() <= 3.0 * se,
                "c[{i}] = {} vs {want} (se {se})",
                report.c[i]
            );
        }
    }

    #[test]
    fn spectrum_bessel_equality_for_in_span_samples() {
        let spec = Spec64::random(12, vec![3.0, 2.0, 1.0], LatentDist::Gaussian, 8).unwrap();
        let data = sample_clean(&spec, 32, 9).unwrap();
        for j in 0..data.len() {
            let x = data.samples().col(j);
            let total: f64 = (0..3)
                .map(|i| dot(&spec.component(i), &x).powi(2))
                .sum();
            let nx2 = dot(&x, &x);
            assert!((total - nx2).abs() <= 1e-10 * nx2.max(1.0));
        }
    }

    #[test]
    fn spectrum_skips_zero_columns() {
        let spec = Spec64::random(6, vec![1.0], LatentDist::Gaussian, 5).unwrap();
        let u0 = spec.component(0);
        let samples = Matrix64::from_fn(6, 3, |i, j| if j == 1 { 0.0 } else { u0[i] });
        let report = spectrum_report(&samples, &spec).unwrap();
        assert_eq!(report.skipped, 1);
        assert_eq!(report.n_samples, 2);

        let zeros = Matrix64::zeros(6, 3);
        assert!(matches!(
            spectrum_report(&zeros, &spec),
            Err(Error::EmptyReport)
        ));
    }

    #[test]
    fn power_iteration_on_diagonal() {
        let a = Matrix64::new(3, 3, vec![3.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        let v = power_iteration(&a, 50, 1).unwrap();
        assert!((v[0].abs() - 1.0).abs() <= 1e-8);
        assert!(v[1].abs() <= 1e-8);
        assert!(v[2].abs() <= 1e-8);
    }

    #[test]
    fn power_iteration_rank_one_single_step() {
        let spec = Spec64::random(9, vec![2.0], LatentDist::Gaussian, 4).unwrap();
        let cov = spec.population_covariance();
        let v = power_iteration(&cov, 1, 3).unwrap();
        let c = dot(&v, &spec.component(0)).abs();
        assert!(c >= 1.0 - 1e-12, "overlap {c}");
    }

    #[test]
    fn power_iteration_matches_eigensolver() {
        // PSD with relative gap >= 0.1
        let basis = random_orthonormal_basis::<f64>(20, 20, 15).unwrap();
        let values: Vec<f64> = (0..20).map(|i| 5.0 * 0.85f64.powi(i)).collect();
        let mut scaled = basis.clone();
        for i in 0..20 {
            for (j, &value) in values.iter().enumerate() {
                scaled.set(i, j, basis.get(i, j) * value);
            }
        }
        let a = scaled.matmul(&basis.transpose()).unwrap().symmetrized();
        let v = power_iteration(&a, 300, 7).unwrap();
        let lead = eigen::sym_eigen(&a).unwrap().eigenvector(0);
        assert!(dot(&v, &lead).abs() >= 1.0 - 1e-6);
    }

    #[test]
    fn power_iteration_breakdown_on_zero_matrix() {
        let a = Matrix64::zeros(4, 4);
        assert!(matches!(
            power_iteration(&a, 10, 0),
            Err(Error::PowerIterationBreakdown { .. })
        ));
    }

    #[test]
    fn covariance_of_signed_component() {
        let spec = Spec64::random(8, vec![1.0], LatentDist::Gaussian, 10).unwrap();
        let u0 = spec.component(0);
        let samples = Matrix64::from_fn(8, 6, |i, j| if j % 2 == 0 { u0[i] } else { -u0[i] });
        let cov = generated_covariance(&samples);
        let outer = Matrix64::from_fn(8, 8, |i, j| u0[i] * u0[j]);
        assert!(cov.sub(&outer).unwrap().frobenius_norm() <= 1e-12);
        assert!((alignment(&samples, &u0).unwrap() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn zero_noise_chain_correlations_are_identity() {
        let spec = Spec64::random(12, vec![3.0, 2.0, 1.0], LatentDist::Gaussian, 17).unwrap();
        let data = sample_clean(&spec, 300, 5).unwrap();
        let schedule = NoiseSchedule::custom(vec![0.0; 5]).unwrap();
        let chain = train_chain(&data, &schedule, 3, 9).unwrap();
        for corr in basis_correlations(&chain).unwrap() {
            let id = Matrix64::identity(3);
            assert!(corr.matrix.sub(&id).unwrap().frobenius_norm() <= 1e-8);
            assert!(corr.diagonality_score() <= 1e-12);
            assert!(corr.partial_diagonality_score() <= 1e-12);
        }
    }

    #[test]
    fn correlations_need_two_levels() {
        let spec = Spec64::random(8, vec![2.0, 1.0], LatentDist::Gaussian, 17).unwrap();
        let data = sample_clean(&spec, 100, 5).unwrap();
        let schedule = NoiseSchedule::custom(vec![0.0]).unwrap();
        let chain = train_chain(&data, &schedule, 2, 9).unwrap();
        assert!(basis_correlations(&chain).is_err());
    }

    #[test]
    fn correlations_entries_bounded() {
        let spec = Spec64::random(12, vec![3.0, 2.0, 1.0], LatentDist::Gaussian, 17).unwrap();
        let data = sample_clean(&spec, 300, 5).unwrap();
        let schedule = NoiseSchedule::make(ScheduleKind::Linear, 6, 2.0).unwrap();
        let chain = train_chain(&data, &schedule, 3, 9).unwrap();
        for corr in basis_correlations(&chain).unwrap() {
            for &v in corr.matrix.data() {
                assert!(v.abs() <= 1.0 + 1e-9);
            }
        }
    }

    #[test]
    fn angle_profile_population_mode_is_zero() {
        let spec = Spec64::random(10, vec![2.0, 1.0], LatentDist::Gaussian, 12).unwrap();
        let schedule = NoiseSchedule::make(ScheduleKind::Constant, 3, 1.0).unwrap();
        let opts = AngleProfileOptions {
            population: true,
            ..Default::default()
        };
        let profile = angle_profile(&spec, &schedule, 100, 2, 1, 0, &opts).unwrap();
        for i in 0..2 {
            for t in 0..=3 {
                // zero up to the sqrt(eps) floor of the angle formula:
                // cos = 1 - O(eps) maps to sin = O(sqrt(eps))
                assert!(profile.value(i, t) <= 1e-7, "profile[{i}][{t}]");
            }
        }
    }

    #[test]
    fn angle_profile_zero_schedule_near_zero() {
        let spec = Spec64::random(10, vec![2.0, 1.0], LatentDist::Gaussian, 12).unwrap();
        let schedule = NoiseSchedule::custom(vec![0.0, 0.0]).unwrap();
        let profile =
            angle_profile(&spec, &schedule, 400, 2, 4, 5, &AngleProfileOptions::default()).unwrap();
        for i in 0..2 {
            for t in 0..2 {
                // finite-sample floor only: latent fluctuations mix the
                // in-span basis slightly
                assert!(profile.value(i, t) <= 0.2, "profile[{i}][{t}]");
            }
        }
    }

    #[test]
    fn angle_profile_monotone_in_noise() {
        let spec = Spec64::random(30, vec![2.0, 1.0], LatentDist::Gaussian, 20).unwrap();
        let schedule = NoiseSchedule::from_cumulative(&[0.0, 0.1, 0.4]).unwrap();
        let profile =
            angle_profile(&spec, &schedule, 800, 2, 60, 21, &AngleProfileOptions::default())
                .unwrap();
        for i in 0..2 {
            let low = profile.value(i, 1);
            let high = profile.value(i, 2);
            let margin =
                2.0 * (profile.stderr_at(i, 1).powi(2) + profile.stderr_at(i, 2).powi(2)).sqrt();
            assert!(
                high > low - margin,
                "index {i}: sin at 0.4 = {high} not above sin at 0.1 = {low}"
            );
        }
    }

    #[test]
    fn greedy_matching_agrees_on_separated_model() {
        let spec = Spec64::random(20, vec![4.0, 2.0, 1.0], LatentDist::Gaussian, 30).unwrap();
        let data = sample_clean(&spec, 1000, 31).unwrap();
        let schedule = NoiseSchedule::from_cumulative(&[0.0, 0.2]).unwrap();
        let chain = train_chain(&data, &schedule, 3, 32).unwrap();
        let idx = match_components(chain.denoiser(1).basis(), &spec, 3, ComponentMatching::Index);
        let greedy =
            match_components(chain.denoiser(1).basis(), &spec, 3, ComponentMatching::Greedy);
        assert_eq!(idx, greedy);
    }

    #[test]
    fn stats_helpers() {
        let (mean, se) = mean_and_stderr(&[1.0f64, 2.0, 3.0, 4.0]);
        assert!((mean - 2.5).abs() < 1e-15);
        let sd = (5.0f64 / 3.0).sqrt();
        assert!((se - sd / 2.0).abs() < 1e-12);
        assert_eq!(kahan_sum([0.1f64; 10]), {
            let mut s = 0.0;
            let mut c = 0.0;
            for _ in 0..10 {
                let y = 0.1 - c;
                let t = s + y;
                c = (t - s) - y;
                s = t;
            }
            s
        });
    }
}
