//! Per-pixel cubic motion splines sampled by cubic convolution.

mod field;
mod fit;
pub mod format;
mod kernel;

pub(crate) use field::check_time;
pub use field::{linear_flow, sample_spline, sample_spline_jacobian, FlowField, FlowSample, SplineField, CH_DX, CH_DY, CH_PRIORITY};
pub use fit::{fit_residual_rms, fit_spline, fit_spline_damped, DEFAULT_DAMPING};
pub use kernel::{keys_kernel, KEYS_A};

/// Default number of control points.
pub const DEFAULT_CONTROL_POINTS: usize = 4;
