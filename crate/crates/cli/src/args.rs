use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hankel_core::DetrendMethod;
use serde::{Serialize, Serializer};

/// Sliding-window embeddings, block-Hankel identification, Kalman smoothing
/// and forecasting for multivariate time series.
#[derive(Debug, Parser, Serialize)]
#[command(name = "hankel-id", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Write a seeded synthetic dataset.
    Generate(GenerateArgs),
    /// Window embedding plus singular-value spectrum.
    Embed(EmbedArgs),
    /// Identify a state-space model from the block-Hankel matrix.
    Identify(IdentifyArgs),
    /// Kalman filter and RTS smoother over an identified model.
    Smooth(SmoothArgs),
    /// Multi-step forecasts, optionally with rolling one-step evaluation.
    Forecast(ForecastArgs),
    /// Procrustes alignment between two embeddings.
    Compare(CompareArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Generate(_) => "generate",
            Command::Embed(_) => "embed",
            Command::Identify(_) => "identify",
            Command::Smooth(_) => "smooth",
            Command::Forecast(_) => "forecast",
            Command::Compare(_) => "compare",
            Command::Serve(_) => "serve",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Timecluster,
    Subspace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    Ar2,
    DoublePeriodic,
    PeriodicSsm,
    ExogenousStepped,
}

/// One preprocessing step. Steps run in the order given.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Step {
    Scale,
    Detrend(DetrendMethod),
}

impl FromStr for Step {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "scale" => Ok(Step::Scale),
            "detrend" | "linear" => Ok(Step::Detrend(DetrendMethod::Linear)),
            "diff" => Ok(Step::Detrend(DetrendMethod::Difference)),
            other => other
                .strip_prefix("poly")
                .and_then(|d| d.parse().ok())
                .map(|d| Step::Detrend(DetrendMethod::Polynomial(d)))
                .ok_or_else(|| {
                    format!("unknown preprocessing step {other:?} (scale, detrend, polyN, diff)")
                }),
        }
    }
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Step::Scale => write!(f, "scale"),
            Step::Detrend(DetrendMethod::Linear) => write!(f, "detrend"),
            Step::Detrend(DetrendMethod::Polynomial(d)) => write!(f, "poly{d}"),
            Step::Detrend(DetrendMethod::Difference) => write!(f, "diff"),
        }
    }
}

impl Serialize for Step {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Args, Serialize)]
pub struct InputArgs {
    /// Series CSV: optional header, optional leading timestamp column.
    #[arg(long)]
    pub input: PathBuf,
    /// Comma-separated steps applied in order: scale, detrend, polyN, diff.
    #[arg(long, value_delimiter = ',')]
    pub preprocess: Vec<Step>,
}

#[derive(Debug, Args, Serialize)]
pub struct WindowArgs {
    #[arg(short = 'L', long = "window")]
    #[serde(rename = "L")]
    pub window: usize,
    /// Fixed rank; overrides --epsilon.
    #[arg(long)]
    pub rank: Option<usize>,
    /// Keep singular values with σᵢ/σ₁ above this (default 1e-2).
    #[arg(long)]
    pub epsilon: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct OutputArgs {
    #[arg(long, default_value = "out")]
    pub output_dir: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args, Serialize)]
pub struct GenerateArgs {
    /// Generator with default parameters.
    #[arg(long, value_enum, required_unless_present = "spec", conflicts_with = "spec")]
    pub generator: Option<Generator>,
    /// Generator spec JSON, as written to spec.json by an earlier run.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(short = 'T', long)]
    pub length: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "out")]
    pub output_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct EmbedArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub window: WindowArgs,
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    /// Subtract column means before the decomposition.
    #[arg(long)]
    pub center: bool,
    #[arg(long, value_enum, default_value_t = Method::Subspace)]
    pub method: Method,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct IdentifyArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,
    /// Exogenous input CSV, same length as the series.
    #[arg(long)]
    pub inputs: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub window: WindowArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct SmoothArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub inputs: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub window: WindowArgs,
    /// True state CSV (`T × n`); adds aligned errors to metrics.json.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
#[command(disable_help_flag = true)]
pub struct ForecastArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub window: WindowArgs,
    #[arg(short = 'h', long)]
    pub horizon: usize,
    /// Also run the rolling one-step-ahead evaluation.
    #[arg(long)]
    pub eval: bool,
    /// First evaluated sample (default T/2).
    #[arg(long)]
    pub eval_start: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub refit_every: usize,
    #[arg(long, default_value_t = 50)]
    pub warmup: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputArgs,
    #[arg(long, action = clap::ArgAction::Help)]
    #[serde(skip)]
    pub help: Option<bool>,
}

#[derive(Debug, Args, Serialize)]
pub struct CompareArgs {
    /// Embedding CSV (`window_start_index,c1..cr`).
    #[arg(long, requires = "b", conflicts_with = "input")]
    pub a: Option<PathBuf>,
    #[arg(long, requires = "a")]
    pub b: Option<PathBuf>,
    /// Compare both methods on this series instead.
    #[arg(long, requires = "window", required_unless_present = "a")]
    pub input: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub preprocess: Vec<Step>,
    #[arg(short = 'L', long = "window")]
    #[serde(rename = "L")]
    pub window: Option<usize>,
    #[arg(long)]
    pub rank: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub center: bool,
    #[arg(long, default_value = "out")]
    pub output_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Persist uploads and models here.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// Static UI bundle to serve.
    #[arg(long)]
    pub static_dir: Option<PathBuf>,
    /// Allowed CORS origin; repeat for several. Any origin when omitted.
    #[arg(long)]
    pub allow_origin: Vec<String>,
}
