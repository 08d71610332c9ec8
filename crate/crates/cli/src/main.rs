//! Command-line front end: robust covariance estimates, the radius sweep,
//! the synthetic experiments and the two applications.
//!
//! Exit status is 0 on success, 2 when the input or configuration is
//! rejected and 3 when the numerics fail. Failures print a single line
//! `error: <Reason>: <message>` to stderr.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "covshrink", version, about = "Distributionally robust covariance shrinkage")]
struct Cli {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base seed for sampling, fold assignment and data splits.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Root tolerance of the shrinkage solver.
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Robust estimator for one nominal matrix or sample.
    Estimate(EstimateArgs),
    /// Shrunk eigenvalues and condition numbers along a radius grid.
    Sweep(SweepArgs),
    /// Frobenius loss against the hyperparameter on spiked covariances.
    SyntheticRisk(RiskArgs),
    /// Frobenius loss against the sample size under `ε = c/√n`.
    Consistency(ConsistencyArgs),
    /// Loss-minimizing radius as dimension and sample size grow together.
    HighDimensional(HighDimArgs),
    /// Rolling minimum-variance portfolio backtest.
    Portfolio(PortfolioArgs),
    /// LDA/QDA accuracy over random train/test splits.
    Classify(ClassifyArgs),
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Covariance matrix CSV, or samples CSV with `--samples`.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Treat the input rows as samples.
    #[arg(long)]
    pub samples: bool,
    /// Use the second-moment matrix of the samples instead of centering them.
    #[arg(long)]
    pub zero_mean: bool,
    #[arg(long)]
    pub divergence: Option<String>,
    /// Fixed radius.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Move a fixed radius at or above the maximal radius just below it.
    #[arg(long)]
    pub clip: bool,
    /// Sample size behind a matrix input.
    #[arg(long)]
    pub sample_size: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Nominal spectrum.
    #[arg(long, value_delimiter = ',')]
    pub eigenvalues: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub divergences: Option<Vec<String>>,
    #[arg(long)]
    pub points: Option<usize>,
    /// Largest radius for divergences without a finite maximal radius.
    #[arg(long)]
    pub max_radius: Option<f64>,
}

#[derive(Debug, Args)]
pub struct RiskArgs {
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub spikes: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub spike_values: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub sample_sizes: Option<Vec<usize>>,
    #[arg(long)]
    pub seeds: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub divergences: Option<Vec<String>>,
    #[arg(long)]
    pub points: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ConsistencyArgs {
    #[arg(long)]
    pub p: Option<usize>,
    /// Radius constant in `ε = c/√n`.
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub sample_sizes: Option<Vec<usize>>,
    #[arg(long)]
    pub seeds: Option<usize>,
    /// `identity` or `banded`.
    #[arg(long)]
    pub truth: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub divergences: Option<Vec<String>>,
}

#[derive(Debug, Args)]
pub struct HighDimArgs {
    /// Dimension as a fraction of the sample size.
    #[arg(long)]
    pub ratio: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub sample_sizes: Option<Vec<usize>>,
    #[arg(long)]
    pub seeds: Option<usize>,
    #[arg(long)]
    pub truth: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub divergences: Option<Vec<String>>,
}

#[derive(Debug, Args)]
pub struct PortfolioArgs {
    /// Returns CSV: a date column followed by one column per asset.
    #[arg(long)]
    pub returns: Option<PathBuf>,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub holding: Option<usize>,
    /// `sample`, `linear` or a divergence name; hyperparameters are chosen
    /// by cross-validation.
    #[arg(long)]
    pub estimator: Option<String>,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    /// Labeled CSV: feature columns followed by an integer label column.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// `lda`, `qda` or both.
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    /// `sample`, `linear` or divergence names.
    #[arg(long, value_delimiter = ',')]
    pub estimators: Option<Vec<String>>,
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let message = e.to_string().replace('\n', " ");
            eprintln!("error: {}: {message}", e.reason());
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}
