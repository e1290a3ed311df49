//! Experiment configuration: JSON file, per-experiment defaults, and flag
//! overrides, resolved into one fully-specified record that the manifest
//! stores verbatim.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use lindiff_core::{LatentDist, ScheduleKind};

/// A config problem; always names the offending field.
#[derive(Debug)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

fn err(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        field: field.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Angles,
    DatasetSize,
    Spectrum,
    BasisCorr,
    Generate,
    PowerIter,
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            ExperimentKind::Angles => "angles",
            ExperimentKind::DatasetSize => "dataset-size",
            ExperimentKind::Spectrum => "spectrum",
            ExperimentKind::BasisCorr => "basis-corr",
            ExperimentKind::Generate => "generate",
            ExperimentKind::PowerIter => "power-iter",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelConfig {
    pub d: usize,
    pub lambdas: Vec<f64>,
    pub latent: LatentDist,
    /// Seed for the ground-truth basis draw.
    pub basis_seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScheduleConfig {
    pub kind: ScheduleKind,
    pub t: usize,
    pub scale: f64,
    /// Explicit cumulative levels; overrides kind/t/scale when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<f64>>,
}

/// Fully resolved experiment description. Serialized into `manifest.json`;
/// re-running a manifest's config reproduces every CSV byte.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub model: ModelConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<PathBuf>,
    pub schedule: ScheduleConfig,
    pub r: usize,
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    pub n_samples: usize,
    pub t_values: Vec<usize>,
    pub n_values: Vec<usize>,
    pub indices: Vec<usize>,
    pub inject: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi_magnitudes: Option<Vec<f64>>,
    pub iters: usize,
    pub output_dir: PathBuf,
    pub emit_svg: bool,
    pub center: bool,
    pub population: bool,
}

/// Partial config as read from a JSON file; anything absent falls back to
/// the experiment's defaults, and command-line flags override both.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub experiment: Option<ExperimentKind>,
    pub model: Option<PartialModel>,
    pub dataset: Option<PathBuf>,
    pub schedule: Option<PartialSchedule>,
    pub r: Option<usize>,
    pub n: Option<usize>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub n_samples: Option<usize>,
    pub t_values: Option<Vec<usize>>,
    pub n_values: Option<Vec<usize>>,
    pub indices: Option<Vec<usize>>,
    pub inject: Option<bool>,
    pub xi_magnitudes: Option<Vec<f64>>,
    pub iters: Option<usize>,
    pub output_dir: Option<PathBuf>,
    pub emit_svg: Option<bool>,
    pub center: Option<bool>,
    pub population: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialModel {
    pub d: Option<usize>,
    pub lambdas: Option<Vec<f64>>,
    pub latent: Option<LatentDist>,
    pub basis_seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialSchedule {
    pub kind: Option<ScheduleKind>,
    pub t: Option<usize>,
    pub scale: Option<f64>,
    pub levels: Option<Vec<f64>>,
}

/// Flag-level overrides (each flag wins over file and defaults).
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub t: Option<usize>,
    pub r: Option<usize>,
    pub n: Option<usize>,
    pub d: Option<usize>,
    pub trials: Option<usize>,
    pub out: Option<PathBuf>,
    pub emit_svg: bool,
    pub no_inject: bool,
    pub latent: Option<LatentDist>,
    pub lambdas: Option<Vec<f64>>,
    pub scale: Option<f64>,
    pub n_samples: Option<usize>,
    pub iters: Option<usize>,
    pub center: bool,
    pub population: bool,
    pub dataset: Option<PathBuf>,
}

/// The benchmark the spectrum / basis-corr / generate / power-iter
/// experiments default to: a rank-3 spike in d = 50 with eigenvalues
/// (3, 2, 1), n = 2000 training samples, and a constant schedule of 65
/// steps at total scale 30 (per-step sigma 30/65). The deterministic chain
/// on this model concentrates onto the leading component, which is what
/// the power-iteration comparison measures.
pub fn bench_model() -> ModelConfig {
    ModelConfig {
        d: 50,
        lambdas: vec![3.0, 2.0, 1.0],
        latent: LatentDist::Gaussian,
        basis_seed: 1,
    }
}

pub const BENCH_SCALE: f64 = 30.0;
pub const BENCH_T: usize = 65;

fn defaults(kind: ExperimentKind) -> ExperimentConfig {
    let bench_schedule = ScheduleConfig {
        kind: ScheduleKind::Constant,
        t: BENCH_T,
        scale: BENCH_SCALE,
        levels: None,
    };
    let base = ExperimentConfig {
        experiment: kind,
        model: bench_model(),
        dataset: None,
        schedule: bench_schedule,
        r: 3,
        n: 2000,
        trials: 100,
        seed: 0, // placeholder; seed is mandatory and checked in resolve()
        n_samples: 500,
        t_values: vec![5, 15, 65],
        n_values: vec![250, 1000, 4000],
        indices: vec![0, 5, 10],
        inject: true,
        xi_magnitudes: None,
        iters: 200,
        output_dir: PathBuf::from("out"),
        emit_svg: false,
        center: false,
        population: false,
    };
    match kind {
        ExperimentKind::Angles => ExperimentConfig {
            model: ModelConfig {
                d: 100,
                lambdas: vec![1.0],
                latent: LatentDist::Gaussian,
                basis_seed: 1,
            },
            schedule: ScheduleConfig {
                kind: ScheduleKind::Custom,
                t: 3,
                scale: 0.2,
                levels: Some(vec![0.0, 0.05, 0.1, 0.2]),
            },
            r: 1,
            n: 1000,
            trials: 200,
            ..base
        },
        ExperimentKind::DatasetSize => ExperimentConfig {
            model: ModelConfig {
                d: 60,
                lambdas: (0..12).map(|i| 3.0 * 0.87f64.powi(i)).collect(),
                latent: LatentDist::Gaussian,
                basis_seed: 1,
            },
            schedule: ScheduleConfig {
                kind: ScheduleKind::Custom,
                t: 4,
                scale: 1.0,
                levels: Some(vec![0.0, 0.25, 0.5, 1.0]),
            },
            r: 12,
            trials: 50,
            ..base
        },
        ExperimentKind::Spectrum => ExperimentConfig {
            n_samples: 2000,
            ..base
        },
        ExperimentKind::BasisCorr => base,
        ExperimentKind::Generate => base,
        ExperimentKind::PowerIter => base,
    }
}

/// Reads a partial config from a JSON file.
pub fn read_config_file(path: &Path) -> Result<ConfigFile, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| err("config", format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| err("config", format!("{}: {e}", path.display())))
}

/// Layered resolution: defaults for the experiment, then the file, then
/// flags. Validates the result.
pub fn resolve(
    kind: ExperimentKind,
    file: &ConfigFile,
    flags: &Overrides,
) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = defaults(kind);

    if let Some(model) = &file.model {
        if let Some(d) = model.d {
            cfg.model.d = d;
        }
        if let Some(l) = &model.lambdas {
            cfg.model.lambdas = l.clone();
        }
        if let Some(latent) = model.latent {
            cfg.model.latent = latent;
        }
        if let Some(s) = model.basis_seed {
            cfg.model.basis_seed = s;
        }
    }
    if let Some(schedule) = &file.schedule {
        if let Some(k) = schedule.kind {
            cfg.schedule.kind = k;
        }
        if let Some(t) = schedule.t {
            cfg.schedule.t = t;
        }
        if let Some(s) = schedule.scale {
            cfg.schedule.scale = s;
        }
        if schedule.levels.is_some() {
            cfg.schedule.levels = schedule.levels.clone();
        }
    }
    macro_rules! take {
        ($($field:ident),*) => {
            $(if let Some(v) = &file.$field { cfg.$field = v.clone(); })*
        };
    }
    take!(r, n, trials, n_samples, t_values, n_values, indices, inject, iters, output_dir, emit_svg, center, population);
    if file.dataset.is_some() {
        cfg.dataset = file.dataset.clone();
    }
    if file.xi_magnitudes.is_some() {
        cfg.xi_magnitudes = file.xi_magnitudes.clone();
    }
    let file_seed = file.seed;

    // flags win
    if let Some(d) = flags.d {
        cfg.model.d = d;
    }
    if let Some(l) = &flags.lambdas {
        cfg.model.lambdas = l.clone();
    }
    if let Some(latent) = flags.latent {
        cfg.model.latent = latent;
    }
    if let Some(t) = flags.t {
        cfg.schedule.t = t;
        // an explicit -T replaces default custom levels with a constant
        // schedule of that length; levels named in a config file still win
        if cfg.schedule.levels.is_some() && file.schedule.is_none() {
            cfg.schedule.levels = None;
            cfg.schedule.kind = ScheduleKind::Constant;
        }
    }
    if let Some(s) = flags.scale {
        cfg.schedule.scale = s;
    }
    if let Some(r) = flags.r {
        cfg.r = r;
    }
    if let Some(n) = flags.n {
        cfg.n = n;
    }
    if let Some(trials) = flags.trials {
        cfg.trials = trials;
    }
    if let Some(out) = &flags.out {
        cfg.output_dir = out.clone();
    }
    if flags.emit_svg {
        cfg.emit_svg = true;
    }
    if flags.no_inject {
        cfg.inject = false;
    }
    if let Some(ns) = flags.n_samples {
        cfg.n_samples = ns;
    }
    if let Some(iters) = flags.iters {
        cfg.iters = iters;
    }
    if flags.center {
        cfg.center = true;
    }
    if flags.population {
        cfg.population = true;
    }
    if let Some(ds) = &flags.dataset {
        cfg.dataset = Some(ds.clone());
    }

    // untouched default indices follow the model's rank; explicit indices
    // are validated as given
    if file.indices.is_none() {
        let rank = cfg.model.lambdas.len().min(cfg.r);
        cfg.indices.retain(|&i| i < rank);
        if cfg.indices.is_empty() {
            cfg.indices.push(0);
        }
    }

    // seed is mandatory, never defaulted
    cfg.seed = match flags.seed.or(file_seed) {
        Some(s) => s,
        None => return Err(err("seed", "seed is required")),
    };

    validate(&cfg)?;
    Ok(cfg)
}

/// Validates a fully resolved config (also applied to manifests fed back
/// through `--config`).
pub fn validate(cfg: &ExperimentConfig) -> Result<(), ConfigError> {
    if cfg.model.d == 0 {
        return Err(err("model.d", "dimension must be positive"));
    }
    if cfg.model.lambdas.is_empty() {
        return Err(err("model.lambdas", "need at least one eigenvalue"));
    }
    if cfg.model.lambdas.len() > cfg.model.d {
        return Err(err(
            "model.lambdas",
            "rank exceeds the ambient dimension",
        ));
    }
    for w in cfg.model.lambdas.windows(2) {
        if w[0] <= w[1] {
            return Err(err(
                "model.lambdas",
                "eigenvalues must be strictly descending",
            ));
        }
    }
    if *cfg.model.lambdas.last().unwrap() <= 0.0 {
        return Err(err("model.lambdas", "eigenvalues must be positive"));
    }
    match &cfg.schedule.levels {
        Some(levels) => {
            if levels.is_empty() {
                return Err(err("schedule.levels", "must not be empty"));
            }
            if levels[0] < 0.0 || levels.windows(2).any(|w| w[1] < w[0]) {
                return Err(err(
                    "schedule.levels",
                    "must be non-negative and non-decreasing",
                ));
            }
        }
        None => {
            if cfg.schedule.t < 1 {
                return Err(err("schedule.t", "T must be >= 1"));
            }
            if cfg.schedule.scale <= 0.0 {
                return Err(err("schedule.scale", "scale must be > 0"));
            }
            if cfg.schedule.kind == ScheduleKind::Custom {
                return Err(err(
                    "schedule.kind",
                    "custom schedules need explicit levels",
                ));
            }
        }
    }
    if cfg.r == 0 {
        return Err(err("r", "need at least one component"));
    }
    if cfg.r > cfg.model.d {
        return Err(err("r", "components exceed the ambient dimension"));
    }
    if cfg.dataset.is_none() && cfg.r > cfg.n {
        return Err(err("r", "components exceed the sample count"));
    }
    if cfg.n < 2 {
        return Err(err("n", "need at least 2 samples"));
    }
    if cfg.trials == 0 {
        return Err(err("trials", "need at least one trial"));
    }
    if cfg.n_samples == 0 {
        return Err(err("n_samples", "need at least one generated sample"));
    }
    if cfg.iters == 0 {
        return Err(err("iters", "need at least one iteration"));
    }
    match cfg.experiment {
        ExperimentKind::Spectrum => {
            if cfg.t_values.is_empty() {
                return Err(err("t_values", "need at least one T"));
            }
            if cfg.t_values.contains(&0) {
                return Err(err("t_values", "every T must be >= 1"));
            }
            if let Some(xi) = &cfg.xi_magnitudes {
                if cfg.t_values.iter().any(|&t| xi.len() != t + 1) {
                    return Err(err(
                        "xi_magnitudes",
                        "length must be T + 1 for every swept T",
                    ));
                }
            }
        }
        ExperimentKind::DatasetSize => {
            if cfg.n_values.is_empty() {
                return Err(err("n_values", "need at least one dataset size"));
            }
            if cfg.n_values.iter().any(|&n| n < 2) {
                return Err(err("n_values", "every dataset size must be >= 2"));
            }
            let rank = cfg.model.lambdas.len().min(cfg.r);
            if cfg.indices.iter().any(|&i| i >= rank) {
                return Err(err("indices", "index outside the tracked components"));
            }
        }
        _ => {}
    }
    if let Some(xi) = &cfg.xi_magnitudes {
        if xi.iter().any(|&e| e < 0.0) {
            return Err(err("xi_magnitudes", "must be non-negative"));
        }
    }
    if cfg.dataset.is_some()
        && matches!(
            cfg.experiment,
            ExperimentKind::Angles | ExperimentKind::DatasetSize | ExperimentKind::Spectrum
        )
    {
        return Err(err(
            "dataset",
            "this experiment needs the ground-truth model; dataset files apply to basis-corr, generate, and power-iter",
        ));
    }
    Ok(())
}
