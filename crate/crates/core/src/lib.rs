//! Event-assisted video frame interpolation.
//!
//! Motion between two key frames is represented by per-pixel cubic splines
//! (sampled by cubic convolution), estimated once from the frames and the
//! events between them, and then sampled at any number of latent times.
//! Key-frame features are forward-warped by softmax splatting and fused with
//! event-synthesized frames.

pub mod error;
pub mod estimator;
pub mod events;
pub mod fusion;
pub mod pipeline;
pub mod spline;
pub mod synthetic;
pub mod tensor;
pub mod warp;

pub use error::{Error, Result};
pub use events::{Event, EventStream, Frame, Polarity, SimulatorConfig, VoxelGrid};
pub use spline::{FlowField, FlowSample, SplineField};
pub use warp::{FeaturePyramid, SplatResult};
