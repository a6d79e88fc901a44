//! Command-line flags.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use stabcert::bise::{DEFAULT_M, DEFAULT_STEP};
use stabcert::smoothing::STABILITY_SAMPLES;

#[derive(Debug, Parser)]
#[command(name = "stabcert", version, about = "Certify the stability of feature attributions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate or certify stability of each item's attribution.
    Certify(CertifyArgs),
    /// Soft stability over a list of radii, one row per radius.
    Curve(CurveArgs),
    /// Dump spectra of a model's Boolean restriction and check the smoothing identities.
    Spectrum(SpectrumArgs),
    /// Insertion and deletion BISE scores with certified bounds.
    Bise(BiseArgs),
    /// How much a metric's ordering of an attribution pool moves under ranking shuffles.
    Rankstab(RankstabArgs),
    /// Re-run certification on the MuS-smoothed model over a grid of lambdas.
    Smooth(SmoothArgs),
    /// Serve a builtin model over the external line protocol on stdin/stdout.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// Uniform draws from the whole perturbation set.
    Soft,
    /// All draws must keep the prediction.
    Hard,
    /// Minimum over per-size estimates.
    PerK,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    Std,
    Monotone,
    Pbiased,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricArg {
    InsertionBise,
    DeletionBise,
    Insertion,
    Deletion,
    Morf,
    Lerf,
}

/// Flags shared by every command that runs a model.
#[derive(Debug, Clone, Args, Serialize)]
pub struct ModelArgs {
    /// and[:i,j,...] | majority[:threshold] | table[:seed] | external:<command>
    #[arg(long)]
    pub model: String,
    /// Feature count for builtin models; defaults to the input's length.
    #[arg(long)]
    pub n: Option<usize>,
    /// Tolerance of the scalar-gap relation for single-output models.
    #[arg(long)]
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct OutputArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file; stdout when absent.
    #[serde(skip)]
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ToleranceArgs {
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CertifyArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// JSON-lines items {"x": [...], "scores": [...], "top_fraction": 0.25}.
    #[serde(skip)]
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub radii: Vec<usize>,
    #[command(flatten)]
    pub tolerance: ToleranceArgs,
    #[arg(long, value_enum, default_value_t = Estimator::Soft)]
    pub estimator: Estimator,
    /// Add the exact stability rate by enumeration.
    #[arg(long)]
    pub exact: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CurveArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[serde(skip)]
    #[arg(long)]
    pub input: PathBuf,
    /// Strictly increasing radii.
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
    pub radii: Vec<usize>,
    #[command(flatten)]
    pub tolerance: ToleranceArgs,
    #[arg(long)]
    pub exact: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Items file; the first item's x is the point restricted. Defaults to all ones.
    #[serde(skip)]
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Output coordinate read as the Boolean function.
    #[arg(long, default_value_t = 1)]
    pub class: usize,
    #[arg(long, value_delimiter = ',', default_value = "1.0,0.9,0.75,0.5,0.25")]
    pub lambda: Vec<f64>,
    /// Bias of the p-biased basis; defaults to the smallest lambda.
    #[arg(long)]
    pub p: Option<f64>,
    /// Basis written in CSV output.
    #[arg(long, value_enum, default_value_t = Basis::Std)]
    pub basis: Basis,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BiseArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[serde(skip)]
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = DEFAULT_STEP)]
    pub step: usize,
    #[arg(long, default_value_t = DEFAULT_M)]
    pub m: usize,
    #[command(flatten)]
    pub tolerance: ToleranceArgs,
    /// Score exactly by tabulating the indicator instead of sampling.
    #[arg(long)]
    pub exact: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RankstabArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Items with a "pool" of competing attribution score vectors.
    #[serde(skip)]
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = MetricArg::InsertionBise)]
    pub metric: MetricArg,
    /// window:<size> or swap:<pairs>.
    #[arg(long, default_value = "window:4")]
    pub perturbation: String,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    #[arg(long, default_value_t = DEFAULT_STEP)]
    pub step: usize,
    #[arg(long, default_value_t = DEFAULT_M)]
    pub m: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SmoothArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[serde(skip)]
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub radii: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1.0,0.9,0.75,0.5,0.25")]
    pub lambda: Vec<f64>,
    #[arg(long, default_value_t = STABILITY_SAMPLES)]
    pub mc_samples: usize,
    #[command(flatten)]
    pub tolerance: ToleranceArgs,
    /// Smooth exactly by enumerating the input's support instead of sampling.
    #[arg(long)]
    pub exact: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub model: ModelArgs,
}
