//! Classical spline motion estimation from key frames and events.

mod config;
mod flow;
mod motion;

pub use config::{EstimatorConfig, MotionMode};
pub use flow::{dense_flow, photometric_residual};
pub use motion::{estimate_priority, estimate_spline_motion, nonparametric_motion, nonparametric_sample, time_at, EVENTS_ONLY_BASE};
