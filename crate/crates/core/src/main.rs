use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use rydberg_ode::commands::{self, ExportSample, SweepAxis};
use rydberg_ode::config::{Overrides, RunConfig};
use rydberg_ode::data::BlobConfig;
use rydberg_ode::grid::GridKind;
use rydberg_ode::training::GradientMode;

#[derive(Parser)]
#[command(name = "rydberg-ode", version, about = "Train and analyse analog Rydberg-atom neural-ODE classifiers")]
#[command(after_help = "Dataset files are looked up in $RYDBERG_ODE_DATA_DIR (default: ./data).")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// chain, ring, square or triangle.
    #[arg(long, global = true)]
    grid: Option<GridKind>,
    /// Lattice spacing in µm. For `export`, overrides the checkpoint register.
    #[arg(long, global = true)]
    spacing: Option<f64>,
    #[arg(long, global = true)]
    intervals: Option<usize>,
    #[arg(long, global = true)]
    atoms: Option<usize>,
    /// finite_difference or stochastic_pulse.
    #[arg(long, global = true)]
    gradient_mode: Option<GradientMode>,
    /// Estimate soft labels from measurement shots.
    #[arg(long, global = true)]
    shots: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the encoder and train pulse parameters.
    Train,
    /// Score a checkpoint on a CSV dataset.
    Eval(DataArgs),
    /// Train one model per value of a geometry or timing axis.
    Sweep {
        /// spacing, grid or intervals.
        #[arg(long)]
        axis: SweepAxis,
        /// Comma-separated axis values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
    },
    /// Ensemble robustness study under Gaussian hardware noise.
    Noise(DataArgs),
    /// Emit an analog Hamiltonian program for one sample.
    Export {
        #[arg(long)]
        checkpoint: PathBuf,
        /// CSV holding the sample.
        #[arg(long, conflicts_with = "features")]
        data: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        index: usize,
        #[arg(long, default_value = "label")]
        label_column: String,
        /// Raw feature values, comma-separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        features: Option<Vec<f64>>,
    },
    /// Write a seeded two-blob dataset.
    Synth {
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        features: Option<usize>,
        /// Center distance in units of sigma.
        #[arg(long)]
        separation: Option<f64>,
    },
}

#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "label")]
    label_column: String,
}

fn load_config(g: &Global) -> Result<RunConfig> {
    let mut cfg = match &g.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.apply(&Overrides {
        seed: g.seed,
        grid: g.grid,
        spacing: g.spacing,
        intervals: g.intervals,
        atoms: g.atoms,
        gradient_mode: g.gradient_mode,
        shots: g.shots,
    });
    Ok(cfg.resolve()?)
}

fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    match cli.command {
        Command::Train => {
            let cfg = load_config(g)?;
            let f = commands::cmd_train(&cfg, &g.out)?;
            println!(
                "trained {} parameters: train accuracy {:.4}, test accuracy {:.4}, test F1 {:.4}",
                f.model.n_trainable(),
                f.train_metrics.accuracy,
                f.test_metrics.accuracy,
                f.test_metrics.f1
            );
            println!("wrote {}", g.out.join(commands::CHECKPOINT_FILE).display());
        }
        Command::Eval(a) => {
            let cfg = load_config(g)?;
            let r = commands::cmd_eval(&a.checkpoint, &a.data, &a.label_column, &cfg, &g.out)?;
            println!("{} samples: accuracy {:.4}, F1 {:.4}", r.n_samples, r.metrics.accuracy, r.metrics.f1);
        }
        Command::Sweep { axis, values } => {
            let cfg = load_config(g)?;
            for r in commands::cmd_sweep(&cfg, axis, &values, &g.out)? {
                println!(
                    "{} = {}: {} parameters, test accuracy {:.4}, test F1 {:.4}",
                    axis.name(),
                    r.value,
                    r.n_trainable,
                    r.test.accuracy,
                    r.test.f1
                );
            }
        }
        Command::Noise(a) => {
            let cfg = load_config(g)?;
            let study = commands::cmd_noise(&a.checkpoint, &a.data, &a.label_column, &cfg, &g.out)?;
            for (k, r) in study.multipliers.iter().zip(&study.reports) {
                println!("sigma x{k}: flip rate {:.4}, mean |shift| {:.6}", r.flip_rate, r.mean_abs_shift);
            }
        }
        Command::Export { checkpoint, data, index, label_column, features } => {
            let sample = match (data, features) {
                (Some(path), None) => ExportSample::FromFile { path, label_column, index },
                (None, Some(x)) => ExportSample::Features(x),
                _ => anyhow::bail!("export needs either --data or --features"),
            };
            let path = commands::cmd_export(&checkpoint, &sample, g.spacing, &g.out)?;
            println!("wrote {}", path.display());
        }
        Command::Synth { samples, features, separation } => {
            let cfg = load_config(g)?;
            let blobs = BlobConfig {
                n_samples: samples.unwrap_or(cfg.dataset.blobs.n_samples),
                n_features: features.unwrap_or(cfg.dataset.blobs.n_features),
                separation: separation.unwrap_or(cfg.dataset.blobs.separation),
                sigma: cfg.dataset.blobs.sigma,
                seed: cfg.dataset.blobs.seed,
            };
            let path = commands::cmd_synth(&blobs, &g.out)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
