use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use evfi_core::estimator::MotionMode;
use evfi_core::pipeline::{FusionMode, Method};

#[derive(Debug, Parser)]
#[command(name = "evfi", version, about = "Event-assisted video frame interpolation with spline motion")]
pub struct Cli {
    /// Estimator settings as flat `key = value` lines.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Seed for synthetic scenes and seeded fusion parameters.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Worker threads (default: all cores). Output does not depend on it.
    #[arg(long, global = true, value_parser = clap::value_parser!(usize))]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a synthetic moving-object sequence and its events.
    Simulate(SimulateArgs),
    /// Accumulate events into a temporal voxel grid (VOX1 file).
    Voxelize(VoxelizeArgs),
    /// Find the integer offset of the events relative to the frames.
    Align(AlignArgs),
    /// Estimate the spline motion field of one frame pair (SPL1 file).
    Estimate(EstimateArgs),
    /// Insert latent frames between key frames.
    Interpolate(InterpolateArgs),
    /// Score frames: withheld-frame evaluation or direct comparison.
    Metrics(MetricsArgs),
    /// Time per-frame cost against the number of inserted frames.
    Benchmark(BenchmarkArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ShapeArg {
    Disc,
    Square,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TrajectoryArg {
    Linear,
    Parabola,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Output directory; receives `frames/` and the event file.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 9)]
    pub frames: usize,
    /// Square frame size in pixels.
    #[arg(long, default_value_t = 96)]
    pub size: usize,
    #[arg(long, default_value_t = 10_000)]
    pub interval_us: u64,
    /// Renderings per frame interval fed to the event simulator.
    #[arg(long, default_value_t = 32)]
    pub substeps: usize,
    #[arg(long, default_value_t = 0.1)]
    pub threshold: f64,
    #[arg(long, value_enum, default_value_t = ShapeArg::Disc)]
    pub shape: ShapeArg,
    /// Disc radius or half the square side, pixels.
    #[arg(long, default_value_t = 20.0)]
    pub radius: f64,
    #[arg(long, value_enum, default_value_t = TrajectoryArg::Parabola)]
    pub trajectory: TrajectoryArg,
    /// Horizontal travel over the whole sequence, pixels.
    #[arg(long, default_value_t = 44.0)]
    pub length: f64,
    /// Parabola height, pixels (upward).
    #[arg(long, default_value_t = 14.0)]
    pub apex: f64,
    /// Event file name inside `--out` (`.evs` binary or `.csv`).
    #[arg(long, default_value = "events.evs")]
    pub events_name: String,
}

#[derive(Debug, Args)]
pub struct Input {
    /// Frame directory (images plus timestamps.txt or triggers.csv).
    #[arg(long)]
    pub frames: PathBuf,
    /// Event file (`.evs`/`.bin` binary or `.csv`).
    #[arg(long)]
    pub events: PathBuf,
    /// Offset (dx,dy) of the events relative to the frames, removed before use.
    #[arg(long, value_parser = parse_shift, allow_hyphen_values = true, conflicts_with = "align_radius")]
    pub shift: Option<(i32, i32)>,
    /// Measure the offset on the first frame pair within this radius first.
    #[arg(long)]
    pub align_radius: Option<u32>,
}

#[derive(Debug, Args)]
pub struct EstimatorFlags {
    /// Override an estimator setting (repeatable), e.g. `--set levels=3`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<MotionMode>,
}

#[derive(Debug, Args)]
pub struct VoxelizeArgs {
    /// Event file.
    #[arg(long)]
    pub events: PathBuf,
    /// Sensor size `WxH`, needed for CSV input.
    #[arg(long, value_parser = parse_size)]
    pub sensor: Option<(u32, u32)>,
    #[arg(long)]
    pub t0: u64,
    #[arg(long)]
    pub t1: u64,
    #[arg(long, default_value_t = evfi_core::events::DEFAULT_BINS)]
    pub bins: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AlignArgs {
    #[arg(long)]
    pub frames: PathBuf,
    #[arg(long)]
    pub events: PathBuf,
    #[arg(long, default_value_t = 8)]
    pub radius: u32,
    /// Index of the first frame of the pair to align on.
    #[arg(long, default_value_t = 0)]
    pub pair: usize,
    /// Write the corrected event stream here.
    #[arg(long)]
    pub write: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub input: Input,
    #[command(flatten)]
    pub estimator: EstimatorFlags,
    /// Index of the first frame of the pair.
    #[arg(long, default_value_t = 0)]
    pub pair: usize,
    /// Output SPL1 file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct Interpolation {
    #[arg(long, value_parser = parse_method, default_value = "spline")]
    pub method: Method,
    #[arg(long, value_parser = parse_fusion, default_value = "classical")]
    pub fusion: FusionMode,
    /// FUS1 parameter file for gated fusion (default: seeded from `--seed`).
    #[arg(long)]
    pub params: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InterpolateArgs {
    #[command(flatten)]
    pub input: Input,
    #[command(flatten)]
    pub estimator: EstimatorFlags,
    #[command(flatten)]
    pub interpolation: Interpolation,
    /// Frames withheld between key frames.
    #[arg(long, default_value_t = 0)]
    pub skip: usize,
    /// Frames inserted per key-frame gap.
    #[arg(short = 'n', long = "insert", default_value_t = 1)]
    pub insert: usize,
    /// Output frame directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// Frame directory with events for withheld-frame evaluation.
    #[arg(long, requires = "events", conflicts_with_all = ["pred", "truth"])]
    pub frames: Option<PathBuf>,
    #[arg(long)]
    pub events: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub skip: usize,
    #[arg(long, value_parser = parse_shift, allow_hyphen_values = true)]
    pub shift: Option<(i32, i32)>,
    #[command(flatten)]
    pub estimator: EstimatorFlags,
    #[command(flatten)]
    pub interpolation: Interpolation,
    /// Compare two frame directories image by image instead.
    #[arg(long, requires = "truth")]
    pub pred: Option<PathBuf>,
    #[arg(long, requires = "pred")]
    pub truth: Option<PathBuf>,
    /// Also write per-frame scores as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    #[command(flatten)]
    pub input: Input,
    #[command(flatten)]
    pub estimator: EstimatorFlags,
    /// Upsampling factors.
    #[arg(long, value_delimiter = ',', default_values_t = [1usize, 3, 10, 20])]
    pub ns: Vec<usize>,
    #[arg(long, value_delimiter = ',', value_parser = parse_method, default_value = "spline,nonparametric,linear")]
    pub methods: Vec<Method>,
    #[arg(long, default_value_t = 5)]
    pub runs: usize,
    #[arg(long, default_value_t = 1)]
    pub warmup: usize,
    /// Write `method,N,total_ms,per_frame_ms` here.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: evfi_core::Error| e.to_string())
}

fn parse_fusion(s: &str) -> Result<FusionMode, String> {
    s.parse().map_err(|e: evfi_core::Error| e.to_string())
}

fn parse_mode(s: &str) -> Result<MotionMode, String> {
    s.parse().map_err(|e: evfi_core::Error| e.to_string())
}

fn parse_shift(s: &str) -> Result<(i32, i32), String> {
    let (a, b) = s.split_once(',').ok_or("expected dx,dy")?;
    Ok((a.trim().parse().map_err(|_| "bad dx")?, b.trim().parse().map_err(|_| "bad dy")?))
}

fn parse_size(s: &str) -> Result<(u32, u32), String> {
    let (a, b) = s.split_once(['x', 'X']).ok_or("expected WxH")?;
    Ok((a.trim().parse().map_err(|_| "bad width")?, b.trim().parse().map_err(|_| "bad height")?))
}
