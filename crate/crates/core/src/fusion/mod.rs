//! Fusion of warped and synthesized interpolation results.

mod classical;
mod gated;
mod params;

pub use classical::{classical_fuse, double_hole_fraction};
pub use gated::{
    fuse_multiscale, gate_statistics, gate_statistics_csv, gated_compress, FusionInputs, FusionOutput, GateRecord, GateSource, GateStat,
    FINEST_SCALE_RECEPTIVE_RADIUS,
};
pub use params::{FusionConfig, GateParams, ParamSource, ScaleParams, FUS1_MAGIC, INIT_STD};
