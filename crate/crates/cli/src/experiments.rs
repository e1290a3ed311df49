//! Experiment implementations: each builds its inputs from the resolved
//! config, runs the core routines, and writes CSV (and optional SVG)
//! artifacts plus a manifest that reproduces the run byte-for-byte.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use lindiff_core::analysis::{
    alignment, angle_profile, basis_correlations, power_iteration, spectrum_report_basis,
    AngleProfile, AngleProfileOptions,
};
use lindiff_core::diffusion::{
    chain_operator, default_injection, generate_deterministic, generate_with_noise, sample_xi,
    save_chain, train_chain_with, DenoiserChain, TrainOptions,
};
use lindiff_core::eigen::sym_eigen;
use lindiff_core::io::save_ldmx;
use lindiff_core::matrix::inner;
use lindiff_core::rng::derive_seed;
use lindiff_core::spiked::{load_dataset, sample_clean};
use lindiff_core::{
    Dataset64, Error, Matrix64, NoiseSchedule64, Result, ScheduleKind, SpikedModelSpec64,
};

use crate::config::{ExperimentConfig, ExperimentKind, ScheduleConfig};
use crate::svg::{self, Series};

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads for Monte Carlo fan-out; `None` uses the rayon
    /// default. Results are identical for any value.
    pub threads: Option<usize>,
}

#[derive(Debug)]
pub struct RunSummary {
    pub output_dir: PathBuf,
    pub artifacts: Vec<String>,
}

/// What `manifest.json` holds: enough to re-run the experiment exactly.
#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub config: ExperimentConfig,
    pub artifacts: Vec<String>,
}

/// Runs one experiment end to end and writes its artifacts.
pub fn run(cfg: &ExperimentConfig, options: &RunOptions) -> Result<RunSummary> {
    std::fs::create_dir_all(&cfg.output_dir)
        .map_err(|e| io_err(&cfg.output_dir, e))?;

    let artifacts = match options.threads {
        Some(threads) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| Error::Argument {
                    op: "threads",
                    detail: e.to_string(),
                })?;
            pool.install(|| dispatch(cfg))?
        }
        None => dispatch(cfg)?,
    };

    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        artifacts: artifacts.clone(),
    };
    let manifest_path = cfg.output_dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&manifest_path, text).map_err(|e| io_err(&manifest_path, e))?;

    let mut all = artifacts;
    all.push("manifest.json".to_string());
    Ok(RunSummary {
        output_dir: cfg.output_dir.clone(),
        artifacts: all,
    })
}

fn dispatch(cfg: &ExperimentConfig) -> Result<Vec<String>> {
    match cfg.experiment {
        ExperimentKind::Angles => run_angles(cfg),
        ExperimentKind::DatasetSize => run_dataset_size(cfg),
        ExperimentKind::Spectrum => run_spectrum(cfg),
        ExperimentKind::BasisCorr => run_basis_corr(cfg),
        ExperimentKind::Generate => run_generate(cfg),
        ExperimentKind::PowerIter => run_power_iter(cfg),
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source: e,
    }
}

fn build_model(cfg: &ExperimentConfig) -> Result<SpikedModelSpec64> {
    SpikedModelSpec64::random(
        cfg.model.d,
        cfg.model.lambdas.clone(),
        cfg.model.latent,
        cfg.model.basis_seed,
    )
}

fn build_schedule(schedule: &ScheduleConfig) -> Result<NoiseSchedule64> {
    match &schedule.levels {
        Some(levels) => NoiseSchedule64::from_cumulative(levels),
        None => NoiseSchedule64::make(schedule.kind, schedule.t, schedule.scale),
    }
}

fn train_options(cfg: &ExperimentConfig) -> TrainOptions {
    TrainOptions {
        center: cfg.center,
        ..Default::default()
    }
}

/// Training inputs: synthetic draw from the model, or a user-supplied file.
fn training_data(cfg: &ExperimentConfig) -> Result<Dataset64> {
    match &cfg.dataset {
        Some(path) => load_dataset(path),
        None => {
            let spec = build_model(cfg)?;
            sample_clean(&spec, cfg.n, derive_seed(cfg.seed, "data", &[]))
        }
    }
}

fn fnum(v: f64) -> String {
    format!("{v}")
}

fn write_artifact(cfg: &ExperimentConfig, name: &str, content: &str) -> Result<String> {
    let path = cfg.output_dir.join(name);
    std::fs::write(&path, content).map_err(|e| io_err(&path, e))?;
    Ok(name.to_string())
}

fn profile_csv(profile: &AngleProfile<f64>, with_n: Option<usize>) -> String {
    let mut out = String::new();
    if with_n.is_some() {
        out.push_str("n,index,sigma_bar,sin_theta,stderr\n");
    } else {
        out.push_str("index,sigma_bar,sin_theta,stderr\n");
    }
    for &i in &profile.indices {
        for (t, &level) in profile.noise_levels.iter().enumerate() {
            if let Some(n) = with_n {
                let _ = writeln!(
                    out,
                    "{n},{i},{},{},{}",
                    fnum(level),
                    fnum(profile.value(i, t)),
                    fnum(profile.stderr_at(i, t))
                );
            } else {
                let _ = writeln!(
                    out,
                    "{i},{},{},{}",
                    fnum(level),
                    fnum(profile.value(i, t)),
                    fnum(profile.stderr_at(i, t))
                );
            }
        }
    }
    out
}

fn run_angles(cfg: &ExperimentConfig) -> Result<Vec<String>> {
    let spec = build_model(cfg)?;
    let schedule = build_schedule(&cfg.schedule)?;
    let opts = AngleProfileOptions {
        population: cfg.population,
        train: train_options(cfg),
        ..Default::default()
    };
    let profile = angle_profile(&spec, &schedule, cfg.n, cfg.r, cfg.trials, cfg.seed, &opts)?;

    let mut artifacts = vec![write_artifact(cfg, "angles.csv", &profile_csv(&profile, None))?];
    if cfg.emit_svg {
        let series: Vec<Series> = profile
            .indices
            .iter()
            .map(|&i| Series {
                label: format!("index {i}"),
                points: profile
                    .noise_levels
                    .iter()
                    .enumerate()
                    .map(|(t, &level)| (level, profile.value(i, t)))
                    .collect(),
            })
            .collect();
        let chart = svg::line_chart("Angle to clean component vs noise level", "sigma_bar", "E sin(theta)", &series)?;
        artifacts.push(write_artifact(cfg, "angles.svg", &chart)?);
    }
    Ok(artifacts)
}

fn run_dataset_size(cfg: &ExperimentConfig) -> Result<Vec<String>> {
    let spec = build_model(cfg)?;
    let schedule = build_schedule(&cfg.schedule)?;
    let opts = AngleProfileOptions {
        population: cfg.population,
        train: train_options(cfg),
        ..Default::default()
    };

    let mut csv = String::new();
    let mut profiles: Vec<(usize, AngleProfile<f64>)> = Vec::new();
    for (k, &n) in cfg.n_values.iter().enumerate() {
        let profile = angle_profile(
            &spec,
            &schedule,
            n,
            cfg.r,
            cfg.trials,
            derive_seed(cfg.seed, "dataset-size", &[k as u64]),
            &opts,
        )?;
        let body = profile_csv(&profile, Some(n));
        if k == 0 {
            csv.push_str(&body);
        } else {
            // skip the repeated header
            csv.push_str(body.split_once('\n').map(|x| x.1).unwrap_or(""));
        }
        profiles.push((n, profile));
    }
    let mut artifacts = vec![write_artifact(cfg, "dataset_size.csv", &csv)?];

    if cfg.emit_svg {
        for &idx in &cfg.indices {
            let series: Vec<Series> = profiles
                .iter()
                .map(|(n, profile)| Series {
                    label: format!("n = {n}"),
                    points: profile
                        .noise_levels
                        .iter()
                        .enumerate()
                        .map(|(t, &level)| (level, profile.value(idx, t)))
                        .collect(),
                })
                .collect();
            let chart = svg::line_chart(
                &format!("Component {idx}: angle vs noise by dataset size"),
                "sigma_bar",
                "E sin(theta)",
                &series,
            )?;
            artifacts.push(write_artifact(cfg, &format!("dataset_size_idx{idx}.svg"), &chart)?);
        }
    }
    Ok(artifacts)
}

fn run_spectrum(cfg: &ExperimentConfig) -> Result<Vec<String>> {
    if cfg.schedule.levels.is_some() || cfg.schedule.kind != ScheduleKind::Constant {
        return Err(Error::Argument {
            op: "spectrum",
            detail: "the T sweep is defined for constant schedules".to_string(),
        });
    }
    let spec = build_model(cfg)?;
    let data = sample_clean(&spec, cfg.n, derive_seed(cfg.seed, "data", &[]))?;
    // the sweep holds the per-step noise fixed: T' steps of the same sigma
    let sigma_step = cfg.schedule.scale / cfg.schedule.t as f64;

    let mut csv = String::from("t_max,index,c,std,n_samples\n");
    let mut series: Vec<Series> = Vec::new();
    for &t in &cfg.t_values {
        let schedule =
            NoiseSchedule64::make(ScheduleKind::Constant, t, sigma_step * t as f64)?;
        let chain = train_chain_with(
            &data,
            &schedule,
            cfg.r,
            derive_seed(cfg.seed, "train", &[]),
            &train_options(cfg),
        )?;
        let samples = generate_samples(cfg, &chain, t)?;
        let report = spectrum_report_basis(&samples, spec.basis())?;
        for (i, &c) in report.c.iter().enumerate() {
            let _ = writeln!(csv, "{t},{i},{},{},{}", fnum(c), fnum(report.std[i]), report.n_samples);
        }
        series.push(Series {
            label: format!("T = {t}"),
            points: report
                .c
                .iter()
                .enumerate()
                .map(|(i, &c)| (i as f64, c))
                .collect(),
        });
    }
    let mut artifacts = vec![write_artifact(cfg, "spectrum.csv", &csv)?];
    if cfg.emit_svg {
        let title = if cfg.inject {
            "Generated spectrum (injected noise)"
        } else {
            "Generated spectrum (deterministic chain)"
        };
        let chart = svg::line_chart(title, "component index", "c_i", &series)?;
        artifacts.push(write_artifact(cfg, "spectrum.svg", &chart)?);
    }
    Ok(artifacts)
}

fn generate_samples(
    cfg: &ExperimentConfig,
    chain: &DenoiserChain<f64>,
    stream_tag: usize,
) -> Result<Matrix64> {
    let gen_seed = derive_seed(cfg.seed, "gen", &[stream_tag as u64]);
    if cfg.inject {
        let magnitudes = match &cfg.xi_magnitudes {
            Some(m) => {
                if m.len() != chain.t_max() + 1 {
                    return Err(Error::Argument {
                        op: "xi_magnitudes",
                        detail: format!(
                            "{} magnitudes for a chain with {} levels",
                            m.len(),
                            chain.t_max() + 1
                        ),
                    });
                }
                m.clone()
            }
            None => default_injection(chain.t_max()),
        };
        generate_with_noise(chain, &magnitudes, cfg.n_samples, gen_seed)
    } else {
        let xi = sample_xi(chain.dim(), cfg.n_samples, 1.0, chain.t_max(), gen_seed);
        generate_deterministic(chain, &xi)
    }
}

fn run_basis_corr(cfg: &ExperimentConfig) -> Result<Vec<String>> {
    let data = training_data(cfg)?;
    let schedule = build_schedule(&cfg.schedule)?;
    let chain = train_chain_with(
        &data,
        &schedule,
        cfg.r,
        derive_seed(cfg.seed, "train", &[]),
        &train_options(cfg),
    )?;
    let correlations = basis_correlations(&chain)?;

    let mut csv = String::from("t,step_diagonality,partial_diagonality,partial_leading_energy\n");
    for corr in &correlations {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            corr.t,
            fnum(corr.diagonality_score()),
            fnum(corr.partial_diagonality_score()),
            fnum(corr.partial_leading_energy())
        );
    }
    let mut artifacts = vec![write_artifact(cfg, "basis_corr.csv", &csv)?];

    // measured consecutive-step diagonal overlap next to the small-angle
    // prediction cos(sigma_{t+1}^2 d / (lambda_i^2 n)); reported, never
    // asserted equal
    let lambdas: Vec<f64> = if cfg.dataset.is_some() {
        chain
            .denoiser(0)
            .eigenvalues()
            .iter()
            .map(|&v| v.max(0.0).sqrt())
            .collect()
    } else {
        cfg.model.lambdas.clone()
    };
    let d = chain.dim() as f64;
    let n = data.len() as f64;
    let mut overlap_csv = String::from("t,index,measured_diag,predicted_cos\n");
    for corr in &correlations {
        let sigma_next = chain.schedule().sigma(corr.t + 1);
        for (i, &lambda) in lambdas.iter().enumerate().take(chain.rank()) {
            let measured = corr.matrix.get(i, i);
            let predicted = (sigma_next * sigma_next * d / (lambda * lambda * n)).cos();
            let _ = writeln!(
                overlap_csv,
                "{},{i},{},{}",
                corr.t,
                fnum(measured),
                fnum(predicted)
            );
        }
    }
    artifacts.push(write_artifact(cfg, "step_overlap.csv", &overlap_csv)?);

    if cfg.emit_svg {
        let t_max = chain.t_max();
        let mut checkpoints = vec![0, t_max / 4, t_max / 2, 3 * t_max / 4, t_max - 1];
        checkpoints.dedup();
        for t in checkpoints {
            let corr = &correlations[t];
            let as_rows = |m: &Matrix64| -> Vec<Vec<f64>> {
                (0..m.rows())
                    .map(|i| (0..m.cols()).map(|j| m.get(i, j)).collect())
                    .collect()
            };
            let step = svg::heatmap(&format!("Step overlap |U_{t}ᵀ U_{}|", t + 1), &as_rows(&corr.matrix))?;
            artifacts.push(write_artifact(cfg, &format!("basis_corr_step_{t}.svg"), &step)?);
            let partial = svg::heatmap(&format!("Partial product through t = {t}"), &as_rows(&corr.partial))?;
            artifacts.push(write_artifact(cfg, &format!("basis_corr_partial_{t}.svg"), &partial)?);
        }
    }
    Ok(artifacts)
}

fn run_generate(cfg: &ExperimentConfig) -> Result<Vec<String>> {
    let data = training_data(cfg)?;
    let schedule = build_schedule(&cfg.schedule)?;
    let chain = train_chain_with(
        &data,
        &schedule,
        cfg.r,
        derive_seed(cfg.seed, "train", &[]),
        &train_options(cfg),
    )?;
    let samples = generate_samples(cfg, &chain, chain.t_max())?;

    let samples_path = cfg.output_dir.join("samples.ldmx");
    save_ldmx(&samples, &samples_path)?;
    let mut artifacts = vec!["samples.ldmx".to_string()];

    // reference components: the ground-truth basis for synthetic data, the
    // clean-level empirical basis for file datasets
    let reference = match &cfg.dataset {
        Some(_) => chain.denoiser(0).basis().clone(),
        None => build_model(cfg)?.basis().clone(),
    };
    let report = spectrum_report_basis(&samples, &reference)?;
    let mut csv = String::from("index,c,std,n_samples\n");
    for (i, &c) in report.c.iter().enumerate() {
        let _ = writeln!(csv, "{i},{},{},{}", fnum(c), fnum(report.std[i]), report.n_samples);
    }
    artifacts.push(write_artifact(cfg, "spectrum.csv", &csv)?);

    save_chain(&chain, &cfg.output_dir.join("chain"))?;
    artifacts.push("chain".to_string());

    if cfg.emit_svg {
        let series = vec![Series {
            label: if cfg.inject { "injected".into() } else { "deterministic".into() },
            points: report.c.iter().enumerate().map(|(i, &c)| (i as f64, c)).collect(),
        }];
        let chart = svg::line_chart("Spectrum of generated samples", "component index", "c_i", &series)?;
        artifacts.push(write_artifact(cfg, "spectrum.svg", &chart)?);
    }
    Ok(artifacts)
}

fn run_power_iter(cfg: &ExperimentConfig) -> Result<Vec<String>> {
    let data = training_data(cfg)?;
    let cov = data.samples().gram_scaled();
    let v = power_iteration(&cov, cfg.iters, derive_seed(cfg.seed, "power", &[]))?;
    let eig = sym_eigen(&cov)?;
    let overlap_eigen = inner(&v, &eig.eigenvector(0))?.abs();

    let mut csv = String::from("iters,overlap_with_sample_eigenvector,overlap_with_true_component\n");
    match &cfg.dataset {
        Some(_) => {
            let _ = writeln!(csv, "{},{},", cfg.iters, fnum(overlap_eigen));
        }
        None => {
            let spec = build_model(cfg)?;
            let overlap_true = inner(&v, &spec.component(0))?.abs();
            let _ = writeln!(csv, "{},{},{}", cfg.iters, fnum(overlap_eigen), fnum(overlap_true));
        }
    }
    let mut artifacts = vec![write_artifact(cfg, "power_iter.csv", &csv)?];

    // the alignment the deterministic chain is compared against
    let chain_schedule = build_schedule(&cfg.schedule)?;
    let chain = train_chain_with(
        &data,
        &chain_schedule,
        cfg.r,
        derive_seed(cfg.seed, "train", &[]),
        &train_options(cfg),
    )?;
    let xi = sample_xi(chain.dim(), cfg.n_samples, 1.0, chain.t_max(), derive_seed(cfg.seed, "gen", &[chain.t_max() as u64]));
    let op = chain_operator(&chain, None)?;
    let generated = op.matmul(&xi)?;
    let reference = match &cfg.dataset {
        Some(_) => eig.eigenvector(0),
        None => build_model(cfg)?.component(0),
    };
    let chain_alignment = alignment(&generated, &reference)?;
    let mut align_csv = String::from("n_samples,chain_alignment_with_leading_component\n");
    let _ = writeln!(align_csv, "{},{}", cfg.n_samples, fnum(chain_alignment));
    artifacts.push(write_artifact(cfg, "chain_alignment.csv", &align_csv)?);

    Ok(artifacts)
}
