//! Coarse-to-fine fusion of warping and synthesis features with gated
//! compression.
//!
//! At every scale each source is attenuated by a sigmoid gate computed from
//! the source and its context (all other sources at that scale), the gated
//! sources are concatenated and merged by a convolution. Below the coarsest
//! scale the upsampled previous stage is a fifth gated source. A final
//! convolution projects to image channels and is added to the hole-aware
//! time-weighted blend of the warped intensities.

use ndarray::{Axis, Zip};

use super::classical::blend;
use super::params::{FusionConfig, GateParams};
use crate::error::{Error, Result};
use crate::events::Frame;
use crate::tensor::{concat_channels, resize_bilinear, sigmoid, stack_planes, Conv3x3, Tensor};
use crate::warp::{FeaturePyramid, WarpedPyramid};

const LEAK: f64 = 0.1;

/// Gated sources, in gate order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GateSource {
    Warp0,
    Warp1,
    Synth0,
    Synth1,
    Previous,
}

impl GateSource {
    pub const ALL: [GateSource; 5] = [
        GateSource::Warp0,
        GateSource::Warp1,
        GateSource::Synth0,
        GateSource::Synth1,
        GateSource::Previous,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GateSource::Warp0 => "warp0",
            GateSource::Warp1 => "warp1",
            GateSource::Synth0 => "synth0",
            GateSource::Synth1 => "synth1",
            GateSource::Previous => "previous",
        }
    }
}

/// Gate tensors recorded during one fusion pass.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GateRecord {
    /// `(scale, source, gate)`, coarsest scale first.
    pub gates: Vec<(usize, GateSource, Tensor)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateStat {
    pub scale: usize,
    pub source: GateSource,
    pub mean_gate: f64,
}

/// Mean gate value per scale and source.
pub fn gate_statistics(record: &GateRecord) -> Vec<GateStat> {
    record
        .gates
        .iter()
        .map(|(scale, source, gate)| GateStat {
            scale: *scale,
            source: *source,
            mean_gate: gate.mean().unwrap_or(0.0),
        })
        .collect()
}

/// CSV with header `scale,source,mean_gate`.
pub fn gate_statistics_csv(stats: &[GateStat]) -> String {
    let mut out = String::from("scale,source,mean_gate\n");
    for s in stats {
        out.push_str(&format!("{},{},{:.6}\n", s.scale, s.source.name(), s.mean_gate));
    }
    out
}

/// `src ⊙ sigmoid(conv([src ‖ ctx]))`. Returns the gated tensor and the gate.
pub fn gated_compress(src: &Tensor, ctx: &Tensor, conv: &Conv3x3) -> Result<(Tensor, Tensor)> {
    let (cs, h, w) = src.dim();
    let (cc, hc, wc) = ctx.dim();
    if (h, w) != (hc, wc) {
        return Err(Error::shape(format!("gate source {:?} vs context {:?}", (h, w), (hc, wc))));
    }
    if conv.in_channels() != cs + cc || conv.out_channels() != cs {
        return Err(Error::shape(format!(
            "gate convolution {}->{} does not fit source {cs} + context {cc}",
            conv.in_channels(),
            conv.out_channels()
        )));
    }
    let input = concat_channels(&[src, ctx]);
    let gate = conv.apply(input.view()).mapv(sigmoid);
    Ok((src * &gate, gate))
}

/// Inputs to one multi-scale fusion pass.
pub struct FusionInputs<'a> {
    pub warp0: &'a WarpedPyramid,
    pub warp1: &'a WarpedPyramid,
    pub synth0: &'a FeaturePyramid,
    pub synth1: &'a FeaturePyramid,
    /// Normalized time of the latent frame, for the residual blend.
    pub t: f64,
    /// Timestamp of the output frame, microseconds.
    pub t_us: u64,
}

pub struct FusionOutput {
    pub frame: Frame,
    pub gates: GateRecord,
}

pub fn fuse_multiscale(inputs: &FusionInputs<'_>, params: &GateParams, cfg: &FusionConfig) -> Result<FusionOutput> {
    cfg.validate()?;
    let pyramids = [&inputs.warp0.pyramid, &inputs.warp1.pyramid, inputs.synth0, inputs.synth1];
    let dims = pyramids[0].level_dims();
    for p in &pyramids[1..] {
        if p.level_dims() != dims {
            return Err(Error::shape("fusion pyramids differ in geometry"));
        }
    }
    if dims.len() != cfg.depth {
        return Err(Error::shape(format!("pyramids have {} levels, fusion depth is {}", dims.len(), cfg.depth)));
    }
    if dims[0].0 != cfg.base_channels {
        return Err(Error::shape(format!("pyramids have {} channels, fusion expects {}", dims[0].0, cfg.base_channels)));
    }
    if params.scales.len() != cfg.depth {
        return Err(Error::shape("parameters do not match fusion depth"));
    }
    for w in [inputs.warp0, inputs.warp1] {
        if w.holes.len() != cfg.depth || w.holes.iter().zip(&dims).any(|(m, d)| m.dim() != (d.1, d.2)) {
            return Err(Error::shape("hole masks do not match pyramid levels"));
        }
    }
    let image_channels = params.image_channels();
    if image_channels > cfg.base_channels {
        return Err(Error::shape("more image channels than pyramid channels"));
    }

    let mut record = GateRecord::default();
    let mut previous: Option<Tensor> = None;
    for l in (0..cfg.depth).rev() {
        let (_, h, w) = dims[l];
        let mut sources: Vec<Tensor> = vec![
            masked(inputs.warp0.pyramid.level(l), &inputs.warp0.holes[l]),
            masked(inputs.warp1.pyramid.level(l), &inputs.warp1.holes[l]),
            inputs.synth0.level(l).clone(),
            inputs.synth1.level(l).clone(),
        ];
        if let Some(prev) = previous.take() {
            sources.push(upsample(&prev, h, w));
        }
        let scale = &params.scales[l];
        if scale.gates.len() != sources.len() {
            return Err(Error::shape(format!("scale {l} has {} gates for {} sources", scale.gates.len(), sources.len())));
        }
        let mut gated = Vec::with_capacity(sources.len());
        for (i, src) in sources.iter().enumerate() {
            let others: Vec<&Tensor> = sources.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, s)| s).collect();
            let ctx = concat_channels(&others);
            let (g, gate) = gated_compress(src, &ctx, &scale.gates[i])?;
            record.gates.push((l, GateSource::ALL[i], gate));
            gated.push(g);
        }
        let refs: Vec<&Tensor> = gated.iter().collect();
        let merged = scale.merge.apply(concat_channels(&refs).view());
        previous = Some(merged.mapv(|v| if v > 0.0 { v } else { LEAK * v }));
    }

    let features = previous.expect("depth >= 1");
    let projected = params.head.apply(features.view());
    let c = image_channels;
    let take = |t: &Tensor| t.slice_axis(Axis(0), ndarray::Slice::from(0..c)).to_owned();
    let residual = blend(
        take(inputs.warp0.pyramid.level(0)).view(),
        inputs.warp0.holes[0].view(),
        take(inputs.warp1.pyramid.level(0)).view(),
        inputs.warp1.holes[0].view(),
        take(inputs.synth0.level(0)).view(),
        take(inputs.synth1.level(0)).view(),
        inputs.t,
    );
    let out = projected + residual;
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("fusion produced non-finite values".into()));
    }
    Ok(FusionOutput {
        frame: Frame::from_clamped(inputs.t_us, out)?,
        gates: record,
    })
}

/// Chebyshev radius, in full-resolution pixels, over which a change of one
/// finest-scale input pixel can influence the output: gate, merge and head
/// are each one 3×3 convolution.
pub const FINEST_SCALE_RECEPTIVE_RADIUS: usize = 3;

fn masked(features: &Tensor, holes: &ndarray::Array2<bool>) -> Tensor {
    let mut out = features.clone();
    for mut plane in out.outer_iter_mut() {
        Zip::from(&mut plane).and(holes).for_each(|v, h| {
            if *h {
                *v = 0.0;
            }
        });
    }
    out
}

fn upsample(t: &Tensor, h: usize, w: usize) -> Tensor {
    let planes: Vec<_> = t.outer_iter().map(|p| resize_bilinear(p, h, w)).collect();
    stack_planes(&planes, h, w)
}
