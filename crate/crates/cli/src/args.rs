use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use metamed::{Method, Scenario, SeKind};

#[derive(Debug, Parser)]
#[command(name = "metamed", version, about = "Mean/SD estimation from quantile summaries, bootstrap SEs and random-effects meta-analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate one group's mean and SD from its quantile summary.
    Estimate(EstimateArgs),
    /// Meta-analyze two-group comparisons from a CSV file.
    Meta(MetaArgs),
    /// Run simulation cells described in a TOML or JSON file.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Markdown,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct EstimateArgs {
    #[arg(long, default_value = "qe")]
    pub method: Method,
    /// Checked against the quantiles given; inferred when omitted.
    #[arg(long)]
    pub scenario: Option<Scenario>,
    #[arg(long)]
    pub min: Option<f64>,
    #[arg(long)]
    pub q1: Option<f64>,
    #[arg(long)]
    pub median: Option<f64>,
    #[arg(long)]
    pub q3: Option<f64>,
    #[arg(long)]
    pub max: Option<f64>,
    /// Sample size. Without `--median` and `--n`, `key=value` pairs are read from stdin.
    #[arg(long)]
    pub n: Option<usize>,
    /// Bootstrap replicates.
    #[arg(long = "B", alias = "b", default_value_t = 1000)]
    pub b: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Markdown)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MetaArgs {
    /// CSV with columns study_id, outcome, group, n, mean, sd, min, q1, median, q3, max.
    pub csv: PathBuf,
    #[arg(long, default_value = "qe")]
    pub method: Method,
    #[arg(long = "se", default_value = "bootstrap")]
    pub se: SeKind,
    #[arg(long = "B", alias = "b", default_value_t = 1000)]
    pub b: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Drop studies with a quantile-reporting group smaller than this.
    #[arg(long, default_value_t = metamed::summaries::DEFAULT_MIN_N)]
    pub min_n: usize,
    /// Drop studies with a Bowley skewness above this.
    #[arg(long, default_value_t = metamed::summaries::DEFAULT_SKEW_CAP)]
    pub skew_cap: f64,
    /// Skip outcomes with fewer studies left after screening.
    #[arg(long, default_value_t = 6)]
    pub min_studies: usize,
    /// Confidence level of the reported intervals.
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[arg(long, value_enum, default_value_t = Format::Markdown)]
    pub format: Format,
    /// Output file; with `--format csv` the study table goes to `<out>.studies.csv`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// TOML or JSON file listing `study` and `meta` cells.
    pub config: PathBuf,
    /// Directory for per-cell and combined result files.
    #[arg(long, default_value = "results")]
    pub out: PathBuf,
    /// Print the planned cells and their workload without running them.
    #[arg(long)]
    pub dry_run: bool,
    #[arg(long, value_enum, default_value_t = Format::Markdown)]
    pub format: Format,
}
