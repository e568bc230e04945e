//! `imfuse` command-line interface.
//!
//! Exit codes: 0 success, 2 usage or format error, 3 degenerate data.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use imfuse_core::FusionError;

mod commands;

#[derive(Parser)]
#[command(name = "imfuse", version, about = "Fuse independent possibility contours into one valid contour")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fuse contour CSV files: combine, validify, normalize.
    Fuse(FuseArgs),
    /// Monte Carlo validity report for a fusion pipeline (JSON).
    Certify(CertifyArgs),
    /// Possibility and necessity of a claim under a contour (JSON).
    Measure(MeasureArgs),
    /// Simulate normal-mean studies and write their contours, fusions and the pooled oracle.
    Demo(DemoArgs),
    /// Null CDF of a rule's statistic on a grid of x, as `x,F` CSV.
    CalibrationCurve(CurveArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RuleArg {
    Min,
    Product,
    Mean,
}

impl RuleArg {
    pub fn rule(self) -> imfuse_core::FusionRule {
        match self {
            RuleArg::Min => imfuse_core::FusionRule::Min,
            RuleArg::Product => imfuse_core::FusionRule::Product,
            RuleArg::Mean => imfuse_core::FusionRule::Mean,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CalibratorArg {
    Closed,
    Mc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InputsArg {
    Uniform,
    Beta21,
}

#[derive(Args, Debug, Clone)]
pub struct CalibratorOpts {
    /// Null CDF: closed form (Monte Carlo fallback where none exists) or Monte Carlo.
    #[arg(long, value_enum, default_value_t = CalibratorArg::Closed)]
    pub calibrator: CalibratorArg,
    /// Monte Carlo calibration sample size.
    #[arg(long, default_value_t = 1_000_000)]
    pub mc_samples: usize,
    /// Seed for every random draw.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args)]
pub struct FuseArgs {
    /// Input contour CSV files (`theta,value`).
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = RuleArg::Min)]
    pub rule: RuleArg,
    #[command(flatten)]
    pub calibration: CalibratorOpts,
    /// Common grid `min,max,points` onto which inputs are resampled.
    #[arg(long)]
    pub grid: Option<String>,
    /// Skip normalization; the output is then a `.field.csv`.
    #[arg(long)]
    pub no_normalize: bool,
    /// Output path.
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Args)]
pub struct CertifyArgs {
    #[arg(long, value_enum)]
    pub rule: RuleArg,
    /// Number of fused contours.
    #[arg(long)]
    pub k: usize,
    /// Replications.
    #[arg(long = "mc", default_value_t = 200_000)]
    pub replications: usize,
    #[command(flatten)]
    pub calibration: CalibratorOpts,
    /// Simulate whole studies and normalize the fused contour.
    #[arg(long)]
    pub normalize: bool,
    /// Law of the inputs at the true parameter.
    #[arg(long, value_enum, default_value_t = InputsArg::Uniform)]
    pub inputs: InputsArg,
    /// Comma-separated levels.
    #[arg(long, default_value = "0.01,0.05,0.1,0.25,0.5")]
    pub alpha: String,
    /// Also write the report as CSV `alpha,exceedance,tolerance,verdict`.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Args)]
pub struct MeasureArgs {
    #[arg(long)]
    pub contour: PathBuf,
    /// Comma-separated closed intervals, e.g. `[-0.6,0.6]` or `[0,1],[2,3]`.
    #[arg(long)]
    pub claim: String,
}

#[derive(Args)]
pub struct DemoArgs {
    /// Number of studies; sample sizes cycle through 5,10,20,50,100.
    #[arg(long)]
    pub k: Option<usize>,
    /// Comma-separated per-study sample sizes (overrides the default cycle).
    #[arg(long)]
    pub n: Option<String>,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub theta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated rules to fuse with.
    #[arg(long, default_value = "min,product,mean")]
    pub rules: String,
    #[arg(long, default_value_t = imfuse_core::contour::DEFAULT_GRID_POINTS)]
    pub grid_points: usize,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Args)]
pub struct CurveArgs {
    #[arg(long, value_enum)]
    pub rule: RuleArg,
    #[arg(long)]
    pub k: usize,
    #[command(flatten)]
    pub calibration: CalibratorOpts,
    /// Number of x values.
    #[arg(long, default_value_t = 101)]
    pub points: usize,
    /// Output path; stdout when omitted.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

/// Error carrying the process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub error: anyhow::Error,
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        Self {
            code: 2,
            error: anyhow::anyhow!(msg.into()),
        }
    }
}

impl From<FusionError> for CliError {
    fn from(e: FusionError) -> Self {
        let code = match e {
            FusionError::DegenerateField => 3,
            _ => 2,
        };
        Self {
            code,
            error: e.into(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self {
            code: 2,
            error: e.into(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fuse(args) => commands::fuse(&args),
        Command::Certify(args) => commands::certify(&args),
        Command::Measure(args) => commands::measure(&args),
        Command::Demo(args) => commands::demo(&args),
        Command::CalibrationCurve(args) => commands::calibration_curve(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {:#}", e.error);
            ExitCode::from(e.code)
        }
    }
}
