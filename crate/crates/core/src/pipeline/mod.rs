//! End-to-end interpolation, dataset handling, alignment, metrics and
//! timing.

mod align;
mod benchmark;
mod dataset;
mod evaluate;
mod interpolate;
mod metrics;

pub use align::align_streams;
pub use benchmark::{benchmark_timing, BenchmarkOptions, BenchmarkReport, BenchmarkRow};
pub use dataset::{load_frames, load_image, read_timestamps, read_triggers, save_frames, save_image, Dataset, TIMESTAMPS_FILE, TRIGGERS_FILE};
pub use evaluate::{evaluate_skip, FrameScore, SkipReport};
pub use interpolate::{
    insertion_times, interpolate, interpolate_pair, keyframe_indices, Fuser, FusionMode, Gap, GapMotion, Interpolated,
    InterpolationConfig, Method,
};
pub use metrics::{psnr, ssim, SSIM_WINDOW};
