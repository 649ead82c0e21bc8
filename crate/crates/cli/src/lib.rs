//! Command-line workflows over prediction dumps: refine, gt-calibrate,
//! simulate, eval and profile.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub mod commands;
pub mod config;
pub mod error;

use error::CliError;

pub const EXIT_CODES: &str = "\
Exit codes:
  0  success
  1  processing failed for at least one video (nothing written)
  2  invalid command line (unknown flag, bad value)
  3  input file or config file missing or unreadable
  4  input failed validation (malformed JSON, schema or range violation)
  5  conflicting units inside a prediction dump

Environment:
  TADREFINE_CONFIG  TOML file with default [refine] and [soft_nms] settings
  RUST_LOG          log filter (default: warn)";

/// Sub-snippet boundary refinement for temporal action detection dumps.
#[derive(Parser, Debug)]
#[command(name = "tadrefine", version, about, after_help = EXIT_CODES)]
pub struct Cli {
    /// TOML config with [refine] and [soft_nms] tables; flags take precedence.
    #[arg(long, global = true, env = "TADREFINE_CONFIG")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Refine proposal boundaries, apply Soft-NMS, write a dump in seconds.
    Refine(RefineArgs),
    /// Build per-video boundary heatmap targets from annotations.
    GtCalibrate(GtCalibrateArgs),
    /// Write a seeded synthetic dump per snippet count plus annotations.
    Simulate(SimulateArgs),
    /// Score a dump against annotations (mAP, boundary error, breakdowns).
    Eval(EvalArgs),
    /// False-positive profile at increasing prediction budgets.
    Profile(ProfileArgs),
}

#[derive(Args, Debug)]
pub struct RefineArgs {
    #[arg(long)]
    pub dump: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Smoothing kernel width in snippets.
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub no_smoothing: bool,
    #[arg(long)]
    pub snap_window: Option<usize>,
    #[arg(long)]
    pub max_offset: Option<f64>,
    #[arg(long)]
    pub soft_nms_sigma: Option<f64>,
    /// Proposals kept per video after Soft-NMS.
    #[arg(long)]
    pub top_k: Option<usize>,
    /// Skip Soft-NMS and keep every refined proposal.
    #[arg(long)]
    pub no_soft_nms: bool,
    /// Keep boundaries as given; only Soft-NMS and unit conversion run.
    #[arg(long)]
    pub no_refine: bool,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

#[derive(Args, Debug)]
pub struct GtCalibrateArgs {
    #[arg(long)]
    pub annotations: PathBuf,
    #[arg(long)]
    pub num_snippets: usize,
    /// Heatmap width in snippets.
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long, default_value = "floor")]
    pub mode: String,
    #[arg(long, value_enum, default_value = "on")]
    pub calibrated: Switch,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// JSON scenario; omitted fields take their defaults.
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Also run the full sweep and write sweep.json.
    #[arg(long)]
    pub sweep: bool,
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum BenchmarkArg {
    Anet,
    Thumos,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub dump: PathBuf,
    #[arg(long)]
    pub annotations: PathBuf,
    #[arg(long, value_enum, default_value = "anet")]
    pub benchmark: BenchmarkArg,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ProfileArgs {
    #[arg(long)]
    pub dump: PathBuf,
    #[arg(long)]
    pub annotations: PathBuf,
    /// Budget multiples of the per-video ground-truth count.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6,7,8,9,10")]
    pub budgets: Vec<usize>,
    /// tIoU at which a prediction counts as a true positive.
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = config::load(cli.config.as_deref())?;
    match cli.command {
        Command::Refine(a) => commands::refine(&a, &cfg),
        Command::GtCalibrate(a) => commands::gt_calibrate(&a),
        Command::Simulate(a) => commands::simulate(&a, &cfg),
        Command::Eval(a) => commands::eval(&a),
        Command::Profile(a) => commands::profile(&a),
    }
}
