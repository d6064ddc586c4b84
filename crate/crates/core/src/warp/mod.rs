//! Forward (softmax splatting) and backward warping, feature pyramids.

mod backward;
mod pyramid;
mod splat;

pub use backward::backward_warp_bilinear;
pub use pyramid::{build_pyramid, intensity, max_depth, scale_flow, warp_pyramid, warp_pyramid_with, FeaturePyramid, WarpedPyramid};
pub use splat::{softmax_splat, SplatResult, HOLE_WEIGHT};
