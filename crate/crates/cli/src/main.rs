//! `recess`: train a small classifier, attack it, and evaluate the DCT
//! feature-filter detector on the results.

mod commands;
mod config;
mod dataset;
mod error;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use recess_core::predictor::PredictorSpec;
use recess_core::{FilterSpec, Shape, Transform};

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "recess",
    version,
    about = "DCT feature-filter adversarial example detector"
)]
struct Cli {
    /// TOML file with defaults; command-line flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Low-pass one PNG in the DCT domain.
    Filter(FilterArgs),
    /// Write a synthetic stand-in for CIFAR-10 in the binary batch format.
    SynthCifar(SynthArgs),
    /// Export a class subset of a CIFAR-10 split as a PNG dataset.
    Export(ExportArgs),
    /// Train the built-in classifier on a class subset of CIFAR-10.
    Train(TrainArgs),
    /// Generate adversarial examples against a built-in model.
    Attack(AttackArgs),
    /// Run the detector on one PNG and print the verdict as JSON.
    Detect(DetectArgs),
    /// TPR/TNR over an α sweep (and optional baseline transforms), ROC and AUC.
    Eval(EvalArgs),
    /// How often naturally noisy images are passed as benign.
    Noise(NoiseArgs),
    /// Time the feature filter.
    Bench(BenchArgs),
}

fn parse_alpha(s: &str) -> Result<f64, String> {
    let alpha: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    FilterSpec::new(alpha).map_err(|e| e.to_string())?;
    Ok(alpha)
}

fn parse_predictor(s: &str) -> Result<PredictorSpec, String> {
    s.parse().map_err(|e: recess_core::Error| e.to_string())
}

fn parse_transform(s: &str) -> Result<Transform, String> {
    s.parse().map_err(|e: recess_core::Error| e.to_string())
}

fn parse_shape(s: &str) -> Result<Shape, String> {
    s.parse().map_err(|e: recess_core::Error| e.to_string())
}

/// A plain number or a fraction such as `8/255`.
fn parse_fraction(s: &str) -> Result<f64, String> {
    let value = match s.split_once('/') {
        Some((n, d)) => {
            let n: f64 = n
                .trim()
                .parse()
                .map_err(|_| format!("`{s}` is not a number"))?;
            let d: f64 = d
                .trim()
                .parse()
                .map_err(|_| format!("`{s}` is not a number"))?;
            n / d
        }
        None => s.parse().map_err(|_| format!("`{s}` is not a number"))?,
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(format!("`{s}` is not finite"))
    }
}

#[derive(Debug, Args)]
struct FilterArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Feature reservation ratio in (0, 1].
    #[arg(long, value_parser = parse_alpha)]
    alpha: Option<f64>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    train_per_class: Option<usize>,
    #[arg(long)]
    test_per_class: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct ExportArgs {
    #[arg(long)]
    cifar_dir: Option<PathBuf>,
    /// Comma-separated CIFAR-10 class indices; labels are renumbered in this order.
    #[arg(long, value_delimiter = ',')]
    classes: Option<Vec<usize>>,
    /// `train` or `test`.
    #[arg(long)]
    split: Option<String>,
    #[arg(long)]
    per_class: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    cifar_dir: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    classes: Option<Vec<usize>>,
    /// Training images per class.
    #[arg(long)]
    train_per_class: Option<usize>,
    /// Test images per class used for the reported accuracy.
    #[arg(long)]
    test_per_class: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Model file to write.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON file for the training summary.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AttackArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    /// `fgsm` or `cw`.
    #[arg(long)]
    method: Option<String>,
    /// FGSM step size; accepts fractions such as `8/255`.
    #[arg(long, value_parser = parse_fraction)]
    eps: Option<f64>,
    /// C&W trade-off constant.
    #[arg(long)]
    c: Option<f64>,
    /// C&W confidence.
    #[arg(long)]
    k: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    step_size: Option<f64>,
    /// PNG dataset directory with a manifest.
    #[arg(long)]
    in_dataset: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Attack at most this many images.
    #[arg(long)]
    limit: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct DetectArgs {
    /// `builtin:<model-file>` or `exec:<command line>`.
    #[arg(long, value_parser = parse_predictor)]
    predictor: Option<PredictorSpec>,
    #[arg(long, value_parser = parse_alpha)]
    alpha: Option<f64>,
    /// Use a baseline transform (e.g. `median:2`) instead of the DCT filter.
    #[arg(long, value_parser = parse_transform, conflicts_with = "alpha")]
    transform: Option<Transform>,
    #[arg(long)]
    input: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// `builtin:<model-file>` or `exec:<command line>`.
    #[arg(long, value_parser = parse_predictor)]
    predictor: Option<PredictorSpec>,
    /// Strictly descending, comma-separated.
    #[arg(long, value_delimiter = ',', value_parser = parse_alpha)]
    alphas: Option<Vec<f64>>,
    /// PNG dataset of clean images with a manifest.
    #[arg(long)]
    benign_dir: Option<PathBuf>,
    /// Repeat for several attacks.
    #[arg(long)]
    adv_dir: Vec<PathBuf>,
    /// Baseline transforms to compare against, e.g. `bits:3,median:2,nlm:11-3-4,rotate:10`.
    #[arg(long, value_delimiter = ',', value_parser = parse_transform)]
    transforms: Option<Vec<Transform>>,
    /// JSON-lines output; printed to stdout when absent.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct NoiseArgs {
    /// `builtin:<model-file>` or `exec:<command line>`.
    #[arg(long, value_parser = parse_predictor)]
    predictor: Option<PredictorSpec>,
    #[arg(long, value_delimiter = ',', value_parser = parse_alpha)]
    alphas: Option<Vec<f64>>,
    /// Comma-separated: gaussian, poisson, saltpepper.
    #[arg(long, value_delimiter = ',')]
    types: Option<Vec<String>>,
    /// One parameter per type: σ, scale, p.
    #[arg(long, value_delimiter = ',')]
    params: Option<Vec<f64>>,
    /// PNG dataset directory with a manifest.
    #[arg(long)]
    input_dir: Option<PathBuf>,
    /// Also report agreement with the clean top-k labels.
    #[arg(long)]
    top_k: Option<usize>,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// `HxWxC`; repeat for several shapes.
    #[arg(long, value_parser = parse_shape)]
    shape: Vec<Shape>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long, value_parser = parse_alpha)]
    alpha: Option<f64>,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let path = cli.config.as_deref();
    match cli.command {
        Command::Filter(a) => commands::filter(a, &config::Config::load(path, "filter")?),
        Command::SynthCifar(a) => {
            commands::synth_cifar(a, &config::Config::load(path, "synth-cifar")?)
        }
        Command::Export(a) => commands::export(a, &config::Config::load(path, "export")?),
        Command::Train(a) => commands::train(a, &config::Config::load(path, "train")?),
        Command::Attack(a) => commands::attack(a, &config::Config::load(path, "attack")?),
        Command::Detect(a) => commands::detect(a, &config::Config::load(path, "detect")?),
        Command::Eval(a) => commands::eval(a, &config::Config::load(path, "eval")?),
        Command::Noise(a) => commands::noise(a, &config::Config::load(path, "noise")?),
        Command::Bench(a) => commands::bench(a, &config::Config::load(path, "bench")?),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
