//! `lindiff` — train linear PCA-projection diffusion chains on
//! spiked-covariance data and run the spectral diagnostics.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lindiff::config::{self, ConfigFile, ExperimentKind, Overrides};
use lindiff::experiments::{run, RunOptions};
use lindiff_core::LatentDist;

#[derive(Parser)]
#[command(
    name = "lindiff",
    version,
    about = "Linear diffusion experiments on spiked-covariance data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Angle between learned and clean components per noise level
    Angles(Flags),
    /// The angle profile across training-set sizes
    DatasetSize(Flags),
    /// Spectral presence of generated samples across chain lengths
    Spectrum(Flags),
    /// Consecutive-basis correlation matrices and their running product
    BasisCorr(Flags),
    /// Train a chain and write generated samples plus their spectrum
    Generate(Flags),
    /// Power iteration against the eigensolver and the trained chain
    PowerIter(Flags),
}

#[derive(Args)]
struct Flags {
    /// JSON config (a plain config or a previously written manifest.json)
    #[arg(long)]
    config: Option<PathBuf>,
    /// RNG seed (required here or in the config; never wall-clock)
    #[arg(long)]
    seed: Option<u64>,
    /// Number of noising steps
    #[arg(long = "T")]
    t: Option<usize>,
    /// PCA components per denoiser
    #[arg(long)]
    r: Option<usize>,
    /// Training samples
    #[arg(long)]
    n: Option<usize>,
    /// Ambient dimension of the synthetic model
    #[arg(long)]
    d: Option<usize>,
    /// Monte Carlo trials
    #[arg(long)]
    trials: Option<usize>,
    /// Output directory
    #[arg(long = "out")]
    out: Option<PathBuf>,
    /// Also write SVG charts
    #[arg(long = "emit-svg")]
    emit_svg: bool,
    /// Disable noise injection during generation
    #[arg(long = "no-inject")]
    no_inject: bool,
    /// Latent coefficient distribution of the synthetic model
    #[arg(long, value_parser = parse_latent)]
    latent: Option<LatentDist>,
    /// Spike eigenvalues, comma separated (e.g. 3,2,1)
    #[arg(long, value_parser = parse_lambdas)]
    lambdas: Option<std::vec::Vec<f64>>,
    /// Schedule scale
    #[arg(long)]
    scale: Option<f64>,
    /// Generated sample count
    #[arg(long = "n-samples")]
    n_samples: Option<usize>,
    /// Power-iteration steps
    #[arg(long)]
    iters: Option<usize>,
    /// Worker threads (results are identical for any value)
    #[arg(long)]
    threads: Option<usize>,
    /// Mean-center the corrupted data before PCA
    #[arg(long)]
    center: bool,
    /// Use the population covariance instead of sampled data
    #[arg(long)]
    population: bool,
    /// Train on a dataset file (LDMX or CSV; columns are samples)
    #[arg(long)]
    dataset: Option<PathBuf>,
}

fn parse_latent(s: &str) -> Result<LatentDist, String> {
    s.parse().map_err(|e| format!("{e}"))
}

fn parse_lambdas(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|part| {
            part.trim()
                .parse::<f64>()
                .map_err(|_| format!("bad eigenvalue `{part}`"))
        })
        .collect()
}

impl Flags {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            t: self.t,
            r: self.r,
            n: self.n,
            d: self.d,
            trials: self.trials,
            out: self.out.clone(),
            emit_svg: self.emit_svg,
            no_inject: self.no_inject,
            latent: self.latent,
            lambdas: self.lambdas.clone(),
            scale: self.scale,
            n_samples: self.n_samples,
            iters: self.iters,
            center: self.center,
            population: self.population,
            dataset: self.dataset.clone(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, flags) = match &cli.command {
        Command::Angles(f) => (ExperimentKind::Angles, f),
        Command::DatasetSize(f) => (ExperimentKind::DatasetSize, f),
        Command::Spectrum(f) => (ExperimentKind::Spectrum, f),
        Command::BasisCorr(f) => (ExperimentKind::BasisCorr, f),
        Command::Generate(f) => (ExperimentKind::Generate, f),
        Command::PowerIter(f) => (ExperimentKind::PowerIter, f),
    };

    let file = match &flags.config {
        Some(path) => match load_config_or_manifest(path) {
            Ok(file) => file,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        },
        None => ConfigFile::default(),
    };

    let cfg = match config::resolve(kind, &file, &flags.overrides()) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };

    let options = RunOptions {
        threads: flags.threads,
    };
    match run(&cfg, &options) {
        Ok(summary) => {
            for artifact in &summary.artifacts {
                println!("{}", summary.output_dir.join(artifact).display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}

/// Accepts either a partial config or a full manifest; a manifest's
/// embedded config becomes the file layer.
fn load_config_or_manifest(path: &PathBuf) -> Result<ConfigFile, lindiff::ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| lindiff::ConfigError {
        field: "config".to_string(),
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| lindiff::ConfigError {
            field: "config".to_string(),
            message: format!("{}: {e}", path.display()),
        })?;
    let config_value = match value.get("config") {
        Some(inner) if value.get("version").is_some() => inner.clone(),
        _ => value,
    };
    serde_json::from_value(config_value).map_err(|e| lindiff::ConfigError {
        field: "config".to_string(),
        message: format!("{}: {e}", path.display()),
    })
}
