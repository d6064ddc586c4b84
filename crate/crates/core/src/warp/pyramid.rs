//! Multi-scale feature pyramids built from a fixed filter bank.
//!
//! Each level is the input area-downsampled `l` times and expanded into
//! feature channels by a deterministic bank: the image, its two gradients,
//! then the same three responses of successively blurred copies, until the
//! requested channel count is reached. The first `C_in` channels of every
//! level are the (downsampled) intensities.

use ndarray::{Array2, Array3, ArrayView3, Axis};

use super::splat::softmax_splat;
use crate::error::{Error, Result};
use crate::spline::{FlowField, SplineField};
use crate::tensor::{blur_binomial, downsample_area, gradients, resize_bilinear, stack_planes};

#[derive(Debug, Clone, PartialEq)]
pub struct FeaturePyramid {
    levels: Vec<Array3<f64>>,
}

impl FeaturePyramid {
    pub fn new(levels: Vec<Array3<f64>>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::invalid("pyramid needs at least one level"));
        }
        for pair in levels.windows(2) {
            let (_, h0, w0) = pair[0].dim();
            let (_, h1, w1) = pair[1].dim();
            if h1 >= h0 && w1 >= w0 {
                return Err(Error::shape("pyramid levels must shrink"));
            }
        }
        Ok(Self { levels })
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, l: usize) -> &Array3<f64> {
        &self.levels[l]
    }

    pub fn levels(&self) -> &[Array3<f64>] {
        &self.levels
    }

    pub fn channels(&self) -> usize {
        self.levels[0].dim().0
    }

    /// Full-resolution `(H, W)`.
    pub fn dims(&self) -> (usize, usize) {
        let (_, h, w) = self.levels[0].dim();
        (h, w)
    }

    pub fn level_dims(&self) -> Vec<(usize, usize, usize)> {
        self.levels.iter().map(|l| l.dim()).collect()
    }
}

/// Largest admissible depth for an `h×w` input.
pub fn max_depth(h: usize, w: usize) -> usize {
    (h.min(w).max(1).ilog2() as usize).max(1)
}

/// Builds a `levels`-deep pyramid with `channels` feature channels per level.
pub fn build_pyramid(img: ArrayView3<'_, f64>, levels: usize, channels: usize) -> Result<FeaturePyramid> {
    let (cin, h, w) = img.dim();
    if levels == 0 {
        return Err(Error::invalid("pyramid depth must be at least 1"));
    }
    if levels > max_depth(h, w) {
        return Err(Error::invalid(format!(
            "pyramid depth {levels} too large for {h}x{w} input (max {})",
            max_depth(h, w)
        )));
    }
    if channels < cin {
        return Err(Error::invalid(format!("pyramid needs at least {cin} channels, got {channels}")));
    }
    let mut base: Vec<Array2<f64>> = img.outer_iter().map(|p| p.to_owned()).collect();
    let mut out = Vec::with_capacity(levels);
    for l in 0..levels {
        if l > 0 {
            base = base.iter().map(|p| downsample_area(p.view())).collect();
        }
        out.push(filter_bank(&base, channels));
    }
    FeaturePyramid::new(out)
}

fn filter_bank(base: &[Array2<f64>], channels: usize) -> Array3<f64> {
    let (h, w) = base[0].dim();
    let mut planes = Vec::with_capacity(channels);
    let mut current: Vec<Array2<f64>> = base.to_vec();
    'outer: loop {
        let grads: Vec<_> = current.iter().map(|p| gradients(p.view())).collect();
        for p in &current {
            if planes.len() == channels {
                break 'outer;
            }
            planes.push(p.clone());
        }
        for (gx, _) in &grads {
            if planes.len() == channels {
                break 'outer;
            }
            planes.push(gx.clone());
        }
        for (_, gy) in &grads {
            if planes.len() == channels {
                break 'outer;
            }
            planes.push(gy.clone());
        }
        current = current.iter().map(|p| blur_binomial(p.view())).collect();
    }
    stack_planes(&planes, h, w)
}

/// A pyramid forward-warped to some time, with per-level hole masks.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpedPyramid {
    pub pyramid: FeaturePyramid,
    pub holes: Vec<Array2<bool>>,
}

/// Samples the spline once at `t` and softmax-splats every level. Coarser
/// levels use the bilinearly resized flow divided by `2^l` and the resized
/// priority.
pub fn warp_pyramid(pyr: &FeaturePyramid, spline: &SplineField, t: f64) -> Result<WarpedPyramid> {
    if pyr.dims() != spline.dims() {
        return Err(Error::shape(format!(
            "pyramid {:?} vs spline {:?}",
            pyr.dims(),
            spline.dims()
        )));
    }
    let sample = spline.sample(t)?;
    warp_pyramid_with(pyr, &sample.flow, &sample.priority)
}

/// Warps every level with a full-resolution flow and priority.
pub fn warp_pyramid_with(pyr: &FeaturePyramid, flow: &FlowField, priority: &Array2<f64>) -> Result<WarpedPyramid> {
    if pyr.dims() != flow.dims() || priority.dim() != flow.dims() {
        return Err(Error::shape("pyramid, flow and priority must share full-resolution geometry"));
    }
    let mut levels = Vec::with_capacity(pyr.depth());
    let mut holes = Vec::with_capacity(pyr.depth());
    for (l, feat) in pyr.levels().iter().enumerate() {
        let (_, h, w) = feat.dim();
        let (lf, lp) = if l == 0 {
            (flow.clone(), priority.clone())
        } else {
            (scale_flow(flow, l, h, w), resize_bilinear(priority.view(), h, w))
        };
        let r = softmax_splat(feat.view(), &lf, lp.view())?;
        levels.push(r.warped);
        holes.push(r.holes);
    }
    Ok(WarpedPyramid { pyramid: FeaturePyramid::new(levels)?, holes })
}

/// Resizes a full-resolution flow to `h×w` and divides by `2^level`.
pub fn scale_flow(flow: &FlowField, level: usize, h: usize, w: usize) -> FlowField {
    let factor = 0.5f64.powi(level as i32);
    let u = resize_bilinear(flow.u(), h, w) * factor;
    let v = resize_bilinear(flow.v(), h, w) * factor;
    FlowField::from_components(u, v).expect("same size")
}

/// Extracts the first `channels` planes of level 0.
pub fn intensity(pyr: &FeaturePyramid, channels: usize) -> Array3<f64> {
    pyr.level(0).slice_axis(Axis(0), ndarray::Slice::from(0..channels)).to_owned()
}
