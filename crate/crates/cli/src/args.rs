use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::truth::TruthSpec;

#[derive(Debug, Parser)]
#[command(
    name = "noisespec",
    version,
    about = "Qubit dephasing-noise spectroscopy: simulate, estimate, benchmark"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Master seed for every random draw (default 0, or the config file's seed).
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,

    /// Comma-separated output formats.
    #[arg(long, global = true, value_delimiter = ',', default_value = "csv,json")]
    pub format: Vec<Format>,

    /// Worker threads for `bench` (default: available parallelism).
    #[arg(long, global = true, value_parser = clap::value_parser!(u32).range(1..))]
    pub workers: Option<u32>,

    /// Experiment configuration (JSON); flags override its fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate the CPMG filter functions on the frequency grid.
    Filters(BankArgs),
    /// Draw single-shot data for a true spectrum.
    Simulate(SimulateArgs),
    /// Estimate the spectrum from a measurement record.
    Estimate(EstimateArgs),
    /// Run the randomized-truth benchmark.
    Bench(BenchArgs),
}

/// Filter-bank and grid overrides shared by every subcommand.
#[derive(Debug, Clone, Args)]
pub struct BankArgs {
    /// Largest pulse count; the bank holds p = 1..=p_max.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub p_max: Option<u32>,

    /// Total sequence time.
    #[arg(long = "T", alias = "total-time")]
    pub total_time: Option<f64>,

    /// Grid cutoff Ω.
    #[arg(long)]
    pub omega_max: Option<f64>,

    /// Number of grid points.
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
    pub n_points: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// `one-on-f[:A=..,alpha=..,c=..]`, `gp[:seed=..]` or `constant:S=..`.
    #[arg(long)]
    pub truth: TruthSpec,

    /// Shots per filter.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub shots: u64,

    /// Replace binomial draws by the rounded expected counts.
    #[arg(long)]
    pub noiseless: bool,

    #[command(flatten)]
    pub bank: BankArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EstimatorKind {
    Naive,
    Gp,
    Smc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SmcModelKind {
    /// Unknown (A, α, c) under the configured hyperprior.
    OneOnF,
    /// Unknown α only, with A and c held fixed.
    Exponent,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Measurement record written by `simulate`.
    #[arg(long)]
    pub record: PathBuf,

    #[arg(long, value_enum)]
    pub estimator: EstimatorKind,

    /// Credible level of the GP band.
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,

    /// Override every χ̂ variance fed to the GP.
    #[arg(long)]
    pub noise_variance: Option<f64>,

    #[arg(long, value_enum, default_value = "one-on-f")]
    pub model: SmcModelKind,

    /// Fixed amplitude for `--model exponent`.
    #[arg(long, default_value_t = 10.0)]
    pub amplitude: f64,

    /// Fixed cutoff for `--model exponent`.
    #[arg(long, default_value_t = 3.0)]
    pub cutoff: f64,

    #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
    pub particles: Option<u64>,

    #[command(flatten)]
    pub bank: BankArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScenarioArg {
    GpTruth,
    OneOnF,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Scenario; with no config file this also selects the scenario defaults.
    #[arg(long, value_enum)]
    pub scenario: Option<ScenarioArg>,

    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub trials: Option<u64>,

    /// Comma-separated shots settings.
    #[arg(long, value_delimiter = ',')]
    pub shots: Option<Vec<u64>>,

    #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
    pub particles: Option<u64>,

    #[command(flatten)]
    pub bank: BankArgs,
}
