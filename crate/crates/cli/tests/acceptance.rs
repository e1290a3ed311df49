//! Acceptance suite: one test per criterion, each printing a single
//! PASS/FAIL line (run with `--nocapture` to see them).
//!
//! Thresholds are pinned here. Formula targets come from the rank-1
//! spiked-model angle law `E sin(theta) = (sigma_bar / lambda) sqrt(d/n)`;
//! concentration and floor constants were frozen from pilot runs of this
//! same pipeline (pilot seeds recorded next to each constant).

use std::sync::OnceLock;
use std::time::Instant;

use lindiff_core::analysis::{
    alignment, angle_profile, basis_correlations, power_iteration, spectrum_report,
    AngleProfileOptions,
};
use lindiff_core::diffusion::{
    chain_operator, default_injection, generate_with_noise, sample_xi, train_chain,
};
use lindiff_core::eigen::{orthonormality_residual, sym_eigen};
use lindiff_core::matrix::inner;
use lindiff_core::rng::derive_seed;
use lindiff_core::spiked::sample_clean;
use lindiff_core::{
    Dataset64, DenoiserChain64, LatentDist, Matrix64, NoiseSchedule64, ScheduleKind,
    SpikedModelSpec64,
};

use lindiff::config::{resolve, ConfigFile, ExperimentKind, Overrides};
use lindiff::experiments::{run, Manifest, RunOptions};

/// Emits the per-criterion verdict line and panics on failure.
fn verdict(number: usize, name: &str, ok: bool, details: &str) {
    let state = if ok { "PASS" } else { "FAIL" };
    println!("ACCEPTANCE {number} [{name}]: {state} — {details}");
    assert!(ok, "acceptance criterion {number} ({name}) failed: {details}");
}

fn single_threaded<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .expect("pool")
        .install(f)
}

// ---------------------------------------------------------------------
// The benchmark every concentration criterion runs on: d=50, spike
// eigenvalues (3,2,1), n=2000 samples, constant schedule with T=65 and
// total scale 30, seed 1.

const BENCH_D: usize = 50;
const BENCH_N: usize = 2000;
const BENCH_T: usize = 65;
const BENCH_SCALE: f64 = 30.0;
const BENCH_SEED: u64 = 1;

struct Bench {
    spec: SpikedModelSpec64,
    data: Dataset64,
    chain: DenoiserChain64,
}

fn bench() -> &'static Bench {
    static BENCH: OnceLock<Bench> = OnceLock::new();
    BENCH.get_or_init(|| {
        let spec = SpikedModelSpec64::random(
            BENCH_D,
            vec![3.0, 2.0, 1.0],
            LatentDist::Gaussian,
            BENCH_SEED,
        )
        .unwrap();
        let data = sample_clean(&spec, BENCH_N, BENCH_SEED).unwrap();
        let schedule =
            NoiseSchedule64::make(ScheduleKind::Constant, BENCH_T, BENCH_SCALE).unwrap();
        let chain = train_chain(&data, &schedule, 3, BENCH_SEED).unwrap();
        Bench { spec, data, chain }
    })
}

// ---------------------------------------------------------------------

#[test]
fn criterion_1_rank1_angle_law() {
    // rank-1, d=100, n=1000, lambda=1: E sin(theta) tracks
    // (sigma_bar/lambda) sqrt(d/n) within 20% relative, 200 trials,
    // under 2 minutes on a single thread.
    let start = Instant::now();
    let (profile, targets) = single_threaded(|| {
        let spec = SpikedModelSpec64::random(100, vec![1.0], LatentDist::Gaussian, 5).unwrap();
        let levels = [0.0, 0.05, 0.1, 0.2];
        let schedule = NoiseSchedule64::from_cumulative(&levels).unwrap();
        let profile = angle_profile(
            &spec,
            &schedule,
            1000,
            1,
            200,
            6,
            &AngleProfileOptions::default(),
        )
        .unwrap();
        let targets: Vec<f64> = levels[1..]
            .iter()
            .map(|sb| sb * (100.0f64 / 1000.0).sqrt())
            .collect();
        (profile, targets)
    });
    let elapsed = start.elapsed();

    let mut ok = elapsed.as_secs_f64() < 120.0;
    let mut details = String::new();
    for (t, &target) in targets.iter().enumerate() {
        let got = profile.value(0, t + 1);
        let rel = (got - target).abs() / target;
        ok &= rel <= 0.20;
        details.push_str(&format!(
            "sigma_bar={}: {got:.5} vs {target:.5} ({:+.1}%); ",
            profile.noise_levels[t + 1],
            100.0 * (got / target - 1.0)
        ));
    }
    details.push_str(&format!("single-threaded in {elapsed:.2?}"));
    verdict(1, "rank-1 angle law", ok, &details);
}

#[test]
fn criterion_2_eigenvalue_ordering() {
    // rank-3 (3,2,1), d=50, n=2000, sigma_bar=0.3: larger eigenvalues stay
    // better aligned, gaps beyond 2 standard errors over 100 trials.
    let spec =
        SpikedModelSpec64::random(50, vec![3.0, 2.0, 1.0], LatentDist::Gaussian, 10).unwrap();
    let schedule = NoiseSchedule64::from_cumulative(&[0.0, 0.3]).unwrap();
    let profile = angle_profile(
        &spec,
        &schedule,
        2000,
        3,
        100,
        11,
        &AngleProfileOptions::default(),
    )
    .unwrap();

    let mut ok = true;
    let mut details = String::new();
    for i in 0..3 {
        details.push_str(&format!(
            "sin{}={:.4}±{:.4}; ",
            i,
            profile.value(i, 1),
            profile.stderr_at(i, 1)
        ));
    }
    for i in 0..2 {
        let gap = profile.value(i + 1, 1) - profile.value(i, 1);
        let se = (profile.stderr_at(i, 1).powi(2) + profile.stderr_at(i + 1, 1).powi(2)).sqrt();
        ok &= gap > 2.0 * se;
        details.push_str(&format!("gap{}{}={:.4} (2se={:.4}); ", i, i + 1, gap, 2.0 * se));
    }
    verdict(2, "eigenvalue ordering", ok, details.trim_end_matches("; "));
}

#[test]
fn criterion_3_dataset_size_trend() {
    // rank-12 model (lambda_i = 3 * 0.87^i, d=60, sigma_bar=0.5, 50
    // trials; frozen from the pilot at seeds 3/4): more data lowers the
    // angle at indices 0, 5, 10 by more than 2 standard errors.
    let lambdas: Vec<f64> = (0..12).map(|i| 3.0 * 0.87f64.powi(i)).collect();
    let spec = SpikedModelSpec64::random(60, lambdas, LatentDist::Gaussian, 3).unwrap();
    let schedule = NoiseSchedule64::from_cumulative(&[0.0, 0.5]).unwrap();
    let mut profiles = Vec::new();
    for (k, n) in [250usize, 4000].into_iter().enumerate() {
        let profile = angle_profile(
            &spec,
            &schedule,
            n,
            12,
            50,
            derive_seed(4, "dataset-size", &[k as u64]),
            &AngleProfileOptions::default(),
        )
        .unwrap();
        profiles.push(profile);
    }

    let mut ok = true;
    let mut details = String::new();
    for index in [0usize, 5, 10] {
        let small = profiles[0].value(index, 1);
        let large = profiles[1].value(index, 1);
        let se = (profiles[0].stderr_at(index, 1).powi(2)
            + profiles[1].stderr_at(index, 1).powi(2))
        .sqrt();
        ok &= small - large > 2.0 * se;
        details.push_str(&format!(
            "i{index}: n=250 {small:.4} vs n=4000 {large:.4} (2se={:.4}); ",
            2.0 * se
        ));
    }
    verdict(3, "dataset-size trend", ok, details.trim_end_matches("; "));
}

#[test]
fn criterion_4_concentration_onto_leading_component() {
    // deterministic chain on the benchmark: generated covariance aligns
    // with u0 beyond 0.99 over 500 samples, and c0 strictly increases
    // along T in {5, 15, 65} at fixed per-step sigma. Under 5 minutes.
    let start = Instant::now();
    let (align, c0_values) = single_threaded(|| {
        let bench = bench();
        let op = chain_operator(&bench.chain, None).unwrap();
        let xi = sample_xi(BENCH_D, 500, 1.0, BENCH_T, 2);
        let samples = op.matmul(&xi).unwrap();
        let align = alignment(&samples, &bench.spec.component(0)).unwrap();

        // the sweep keeps the per-step noise at the benchmark value
        // (scale 30/65 per step); pilot at these seeds measured
        // c0 = 0.522, 0.644, 0.994
        let sigma_step = BENCH_SCALE / BENCH_T as f64;
        let mut c0_values = Vec::new();
        for t in [5usize, 15, 65] {
            let schedule =
                NoiseSchedule64::make(ScheduleKind::Constant, t, sigma_step * t as f64).unwrap();
            let chain = train_chain(&bench.data, &schedule, 3, BENCH_SEED).unwrap();
            let op = chain_operator(&chain, None).unwrap();
            let xi = sample_xi(BENCH_D, 2000, 1.0, t, 2);
            let samples = op.matmul(&xi).unwrap();
            let report = spectrum_report(&samples, &bench.spec).unwrap();
            c0_values.push(report.c[0]);
        }
        (align, c0_values)
    });
    let elapsed = start.elapsed();

    let mut ok = align > 0.99;
    ok &= c0_values[0] < c0_values[1] && c0_values[1] < c0_values[2];
    ok &= c0_values[2] > 0.9;
    ok &= elapsed.as_secs_f64() < 300.0;
    let details = format!(
        "alignment {align:.5} (> 0.99); c0(T=5,15,65) = {:.4}, {:.4}, {:.4} strictly increasing; single-threaded in {elapsed:.2?}",
        c0_values[0], c0_values[1], c0_values[2]
    );
    verdict(4, "concentration onto leading component", ok, &details);
}

#[test]
fn criterion_5_power_iteration_equivalence() {
    // power iteration on the clean sample covariance agrees with the
    // eigensolver's leading eigenvector beyond 1 - 1e-6 at 200 steps.
    let bench = bench();
    let cov = bench.data.samples().gram_scaled();
    let v = power_iteration(&cov, 200, 12).unwrap();
    let lead = sym_eigen(&cov).unwrap().eigenvector(0);
    let overlap = inner(&v, &lead).unwrap().abs();
    let ok = overlap > 1.0 - 1e-6;
    verdict(
        5,
        "power-iteration equivalence",
        ok,
        &format!("|<v_power, v_eigen>| = {:.10}", overlap),
    );
}

#[test]
fn criterion_6_injected_noise_spectrum() {
    // rank-5 model (d=50, lambdas 4,1.5,1.2,1.0,0.8, n=2000, T=65, scale
    // 30; frozen from the pilot at seeds 2/3): with the default injection
    // schedule every trailing component keeps presence >= 0.15 over 2000
    // samples, while the deterministic chain drives the same c_i below
    // half that floor. Pilot measured inj >= 0.269, det <= 0.019.
    const FLOOR: f64 = 0.15;
    let spec = SpikedModelSpec64::random(
        50,
        vec![4.0, 1.5, 1.2, 1.0, 0.8],
        LatentDist::Gaussian,
        2,
    )
    .unwrap();
    let data = sample_clean(&spec, 2000, 2).unwrap();
    let schedule = NoiseSchedule64::make(ScheduleKind::Constant, 65, 30.0).unwrap();
    let chain = train_chain(&data, &schedule, 5, 2).unwrap();

    let injected = generate_with_noise(&chain, &default_injection(65), 2000, 3).unwrap();
    let rep_inj = spectrum_report(&injected, &spec).unwrap();

    let op = chain_operator(&chain, None).unwrap();
    let xi = sample_xi(50, 2000, 1.0, 65, 3);
    let det = op.matmul(&xi).unwrap();
    let rep_det = spectrum_report(&det, &spec).unwrap();

    let mut ok = true;
    let mut details = String::new();
    for i in 1..5 {
        ok &= rep_inj.c[i] >= FLOOR;
        ok &= rep_det.c[i] < FLOOR / 2.0;
        details.push_str(&format!(
            "c{i}: inj {:.3} (>= {FLOOR}), det {:.3} (< {}); ",
            rep_inj.c[i],
            rep_det.c[i],
            FLOOR / 2.0
        ));
    }
    verdict(6, "injected-noise spectrum", ok, details.trim_end_matches("; "));
}

#[test]
fn criterion_7_basis_correlation_structure() {
    // benchmark chain: consecutive-basis overlaps are near-diagonal over
    // the earliest quarter of timesteps, and the final partial product's
    // (0,0) entry carries more than 95% of its Frobenius energy.
    let bench = bench();
    let correlations = basis_correlations(&bench.chain).unwrap();
    let quarter = BENCH_T / 4;
    let early_max = correlations[..quarter]
        .iter()
        .map(|c| c.diagonality_score())
        .fold(0.0f64, f64::max);
    let leading_energy = correlations.last().unwrap().partial_leading_energy();

    let ok = early_max < 0.1 && leading_energy > 0.95;
    let details = format!(
        "max diagonality over t < {quarter}: {early_max:.4} (< 0.1); final partial (0,0) energy {leading_energy:.4} (> 0.95)"
    );
    verdict(7, "basis-correlation structure", ok, &details);
}

#[test]
fn criterion_8_numerical_substrate() {
    // 1000 random symmetric matrices (d <= 20): reconstruction within
    // 1e-9 relative, orthonormality within 1e-10 * d, projection
    // idempotency within 1e-8; matmul matches the naive oracle to 1e-12.
    let mut state = 0x9e3779b97f4a7c15u64;
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state % 2_000_000) as f64 / 1_000_000.0 - 1.0
    };

    let mut worst_recon = 0.0f64;
    let mut worst_ortho = 0.0f64;
    let mut worst_idem = 0.0f64;
    for case in 0..1000usize {
        let d = 2 + case % 19; // 2..=20
        let a = Matrix64::from_fn(d, d, |_, _| next()).symmetrized();
        let e = sym_eigen(&a).unwrap();
        let recon_rel =
            e.reconstruct().sub(&a).unwrap().frobenius_norm() / a.frobenius_norm().max(1e-300);
        let ortho = orthonormality_residual(e.eigenvectors()) / d as f64;
        let k = 1 + case % d;
        let p = e.top_k_projection(k).unwrap();
        let idem = p.matmul(&p).unwrap().sub(&p).unwrap().frobenius_norm();
        worst_recon = worst_recon.max(recon_rel);
        worst_ortho = worst_ortho.max(ortho);
        worst_idem = worst_idem.max(idem);
    }

    let mut worst_matmul = 0.0f64;
    for case in 0..200usize {
        let (m, k, n) = (2 + case % 7, 2 + (case / 2) % 6, 2 + (case / 3) % 5);
        let a = Matrix64::from_fn(m, k, |_, _| next());
        let b = Matrix64::from_fn(k, n, |_, _| next());
        let got = a.matmul(&b).unwrap();
        for i in 0..m {
            for j in 0..n {
                let mut acc = 0.0;
                for t in 0..k {
                    acc += a.get(i, t) * b.get(t, j);
                }
                worst_matmul = worst_matmul.max((got.get(i, j) - acc).abs());
            }
        }
    }

    let ok = worst_recon <= 1e-9 && worst_ortho <= 1e-10 && worst_idem <= 1e-8
        && worst_matmul <= 1e-12;
    let details = format!(
        "worst over 1000 matrices: reconstruction {worst_recon:.2e} (<= 1e-9), orthonormality/d {worst_ortho:.2e} (<= 1e-10), idempotency {worst_idem:.2e} (<= 1e-8); matmul vs oracle {worst_matmul:.2e} (<= 1e-12)"
    );
    verdict(8, "numerical substrate", ok, &details);
}

#[test]
fn criterion_9_manifest_determinism() {
    // re-running any experiment from its manifest reproduces every CSV
    // byte, for any worker-thread count.
    let dir = tempfile::tempdir().unwrap();
    let mut all_equal = true;
    let mut details = String::new();

    for (kind, label) in [
        (ExperimentKind::Angles, "angles"),
        (ExperimentKind::Spectrum, "spectrum"),
    ] {
        let first_dir = dir.path().join(format!("{label}-first"));
        let flags = Overrides {
            seed: Some(21),
            d: Some(16),
            lambdas: Some(vec![2.0, 1.0]),
            n: Some(200),
            trials: Some(4),
            n_samples: Some(40),
            out: Some(first_dir.clone()),
            ..Default::default()
        };
        let mut cfg = resolve(kind, &ConfigFile::default(), &flags).unwrap();
        if kind == ExperimentKind::Spectrum {
            cfg.t_values = vec![2, 5];
            cfg.schedule.t = 5;
            cfg.schedule.scale = 1.0;
        }
        run(&cfg, &RunOptions { threads: Some(2) }).unwrap();

        // reread the manifest, rerun its config at two thread counts
        let manifest_text =
            std::fs::read_to_string(first_dir.join("manifest.json")).unwrap();
        let manifest: Manifest = serde_json::from_str(&manifest_text).unwrap();
        for threads in [1usize, 4] {
            let rerun_dir = dir.path().join(format!("{label}-rerun-{threads}"));
            let mut rerun_cfg = manifest.config.clone();
            rerun_cfg.output_dir = rerun_dir.clone();
            run(&rerun_cfg, &RunOptions { threads: Some(threads) }).unwrap();
            for artifact in &manifest.artifacts {
                if !artifact.ends_with(".csv") {
                    continue;
                }
                let a = std::fs::read(first_dir.join(artifact)).unwrap();
                let b = std::fs::read(rerun_dir.join(artifact)).unwrap();
                if a != b {
                    all_equal = false;
                    details.push_str(&format!("{label}/{artifact} differs at {threads} threads; "));
                }
            }
        }
        details.push_str(&format!("{label}: csv bytes stable across reruns and 1/2/4 threads; "));
    }
    verdict(9, "manifest determinism", all_equal, details.trim_end_matches("; "));
}
