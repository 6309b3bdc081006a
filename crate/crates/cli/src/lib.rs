//! `rivwidth` command-line front end.
//!
//! Exit codes: 0 success, 2 invalid input or usage, 3 internal invariant violation.

use std::ffi::OsString;
use std::fmt;
use std::panic::{self, AssertUnwindSafe};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod provenance;

use config::{ConfigFile, InputFormat, SegmentMethod};
use rivwidth_core::synth::RiverKind;
use rivwidth_core::width::WidthMode;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

pub const WORKERS_ENV: &str = "RIVER_NUM_WORKERS";

#[derive(Debug)]
pub enum Failure {
    /// Bad input, configuration or arguments.
    Validation(anyhow::Error),
    /// A post-condition the tool itself should guarantee did not hold.
    Internal(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Validation(_) => EXIT_VALIDATION,
            Failure::Internal(_) => EXIT_INTERNAL,
        }
    }
}

/// Joins the cause chain, skipping causes whose text the previous message already includes.
fn chain_message(e: &anyhow::Error) -> String {
    let mut out = String::new();
    let mut last = String::new();
    for cause in e.chain() {
        let msg = cause.to_string();
        if last.contains(&msg) {
            continue;
        }
        if !out.is_empty() {
            out.push_str(": ");
        }
        out.push_str(&msg);
        last = msg;
    }
    out
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Validation(e) => write!(f, "error: {}", chain_message(e)),
            Failure::Internal(e) => write!(f, "internal error: {}", chain_message(e)),
        }
    }
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Validation(e.into())
    }
}

pub type CmdResult<T = ()> = Result<T, Failure>;

/// Builds an internal failure from a message.
pub fn internal(msg: impl fmt::Display) -> Failure {
    Failure::Internal(anyhow::anyhow!("{msg}"))
}

#[derive(Debug, Parser)]
#[command(
    name = "rivwidth",
    version,
    about = "River width estimation and water segmentation evaluation"
)]
pub struct Cli {
    /// TOML config file; command-line flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Worker threads (default: $RIVER_NUM_WORKERS, then the config file, then all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// NDWI + Otsu water masks from multiband rasters.
    Segment(SegmentArgs),
    /// Per-node river widths from a water mask and centerline nodes.
    Widths(WidthsArgs),
    /// Pixel metrics, cross-entropy and false-positive land cover of predicted masks.
    EvalSeg(EvalSegArgs),
    /// Width error statistics of predicted node widths against reference widths.
    EvalWidth(EvalWidthArgs),
    /// Synthetic scenes and width-error sweeps.
    Synth {
        #[command(subcommand)]
        command: SynthCommand,
    },
    /// Reach-exclusive train/val/test split of a scene manifest.
    Split(SplitArgs),
    /// Comparison table of several eval-width reports.
    Report(ReportArgs),
}

#[derive(Debug, Subcommand)]
pub enum SynthCommand {
    /// One synthetic scene with its ground-truth mask and centerline.
    Scene(SynthSceneArgs),
    /// Width errors over a grid of river widths and orientations.
    Sweep(SynthSweepArgs),
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    /// GeoTIFFs or npy-stack directories.
    pub rasters: Vec<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<InputFormat>,
    #[arg(long, value_enum)]
    pub method: Option<SegmentMethod>,
    #[arg(long)]
    pub green_band: Option<String>,
    #[arg(long)]
    pub nir_band: Option<String>,
    /// Fixed NDWI threshold; skips Otsu.
    #[arg(short = 't', long, allow_hyphen_values = true)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub otsu_bins: Option<usize>,
    /// One Otsu threshold pooled over all inputs.
    #[arg(long)]
    pub global_otsu: bool,
    /// Min-max normalize bands first.
    #[arg(long)]
    pub normalize: bool,
    #[arg(short, long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct WidthsArgs {
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// GeoJSON FeatureCollection of node points.
    #[arg(long)]
    pub centerlines: Option<PathBuf>,
    /// Transect half length in meters.
    #[arg(long)]
    pub half_length: Option<f64>,
    #[arg(long)]
    pub width_mode: Option<WidthMode>,
    #[arg(short, long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub transects_geojson: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalSegArgs {
    /// Predicted masks (repeat or comma-separate).
    #[arg(long, value_delimiter = ',')]
    pub pred: Vec<PathBuf>,
    /// Ground-truth masks, one per prediction.
    #[arg(long, value_delimiter = ',')]
    pub gt: Vec<PathBuf>,
    /// Water probability maps, one per prediction.
    #[arg(long, value_delimiter = ',')]
    pub prob: Vec<PathBuf>,
    /// WorldCover land-cover maps, one per prediction.
    #[arg(long, value_delimiter = ',')]
    pub lulc: Vec<PathBuf>,
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalWidthArgs {
    /// Predicted widths CSV, or a manifest with --pred-field.
    #[arg(long)]
    pub pred: Option<PathBuf>,
    /// Reference widths CSV, or a manifest with --gt-field.
    #[arg(long)]
    pub gt: Option<PathBuf>,
    #[arg(long)]
    pub pred_field: Option<String>,
    #[arg(long)]
    pub gt_field: Option<String>,
    /// Drop nodes whose reference width exceeds this many meters.
    #[arg(long)]
    pub max_width: Option<f64>,
    /// Drop predictions flagged truncated_at_boundary or contains_nodata.
    #[arg(long)]
    pub exclude_flagged: bool,
    /// Method name written into the report.
    #[arg(long)]
    pub method: Option<String>,
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthSceneArgs {
    #[arg(short, long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub kind: Option<RiverKind>,
    /// River width in meters.
    #[arg(long)]
    pub width: Option<f64>,
    /// Flow direction in radians, counter-clockwise from east.
    #[arg(long, allow_hyphen_values = true)]
    pub orientation: Option<f64>,
    #[arg(long)]
    pub amplitude: Option<f64>,
    #[arg(long)]
    pub wavelength: Option<f64>,
    /// Shift of the river axis across the flow, in meters.
    #[arg(long, allow_hyphen_values = true)]
    pub axis_offset: Option<f64>,
    #[arg(long)]
    pub pixel_size: Option<f64>,
    #[arg(long)]
    pub scene_px: Option<usize>,
    #[arg(long)]
    pub noise_sd: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SynthSweepArgs {
    #[arg(short, long)]
    pub out: Option<PathBuf>,
    /// River widths in meters.
    #[arg(long, value_delimiter = ',')]
    pub widths: Vec<f64>,
    /// Number of orientations spread uniformly over [0, π).
    #[arg(long)]
    pub orientations: Option<usize>,
    #[arg(long)]
    pub pixel_size: Option<f64>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub scene_extent: Option<f64>,
    #[arg(long)]
    pub half_length: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    /// Scene manifest (JSON or CSV).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Train, val and test fractions.
    #[arg(long, value_delimiter = ',', num_args = 3)]
    pub fractions: Vec<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Check the manifest's own split column instead of drawing one.
    #[arg(long)]
    pub use_manifest_splits: bool,
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// eval-width JSON reports.
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub out_csv: Option<PathBuf>,
    #[arg(long)]
    pub out_md: Option<PathBuf>,
}

fn init_workers(flag: Option<usize>, file: Option<usize>) -> CmdResult {
    let env = match std::env::var(WORKERS_ENV) {
        Ok(v) if !v.trim().is_empty() => Some(
            v.trim()
                .parse::<usize>()
                .map_err(|_| anyhow::anyhow!("{WORKERS_ENV} must be a positive integer, got {v:?}"))?,
        ),
        _ => None,
    };
    let Some(n) = flag.or(env).or(file) else {
        return Ok(());
    };
    if n == 0 {
        return Err(anyhow::anyhow!("worker count must be at least 1").into());
    }
    // a pool may already exist when running in-process
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

pub fn dispatch(cli: Cli) -> CmdResult {
    let file = match &cli.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    init_workers(cli.workers, file.workers)?;
    match cli.command {
        Command::Segment(a) => commands::segment::run(a, file.segment),
        Command::Widths(a) => commands::widths::run(a, file.widths),
        Command::EvalSeg(a) => commands::eval_seg::run(a, file.eval_seg),
        Command::EvalWidth(a) => commands::eval_width::run(a, file.eval_width),
        Command::Synth { command } => match command {
            SynthCommand::Scene(a) => commands::synth::run_scene(a, file.synth.scene),
            SynthCommand::Sweep(a) => commands::synth::run_sweep(a, file.synth.sweep),
        },
        Command::Split(a) => commands::split::run(a, file.split),
        Command::Report(a) => commands::report::run(a, file.report),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    match panic::catch_unwind(AssertUnwindSafe(|| dispatch(cli))) {
        Ok(Ok(())) => EXIT_OK,
        Ok(Err(f)) => {
            eprintln!("{f}");
            f.exit_code()
        }
        Err(_) => {
            eprintln!("internal error: unexpected panic");
            EXIT_INTERNAL
        }
    }
}
