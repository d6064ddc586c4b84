//! Events, frames, voxel grids and the contrast-threshold simulator.

mod frame;
mod integral;
pub mod io;
mod simulator;
mod stream;
mod voxel;

pub use frame::{keyframe_average, Frame};
pub use integral::{event_integral, event_integral_compensated, synthesize_pseudo_frame, synthesize_pseudo_frame_compensated};
pub use simulator::{simulate_events, SimulatorConfig};
pub use stream::{Event, EventStream, Polarity};
pub use voxel::{build_voxel_grid, VoxelGrid, VoxelGridBuilder, DEFAULT_BINS, VOX1_MAGIC};
