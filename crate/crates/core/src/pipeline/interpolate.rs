//! Latent-frame insertion between key frames.
//!
//! Every key-frame pair is processed symmetrically: motion is estimated from
//! `I₀` forward and from `I₁` backward (on the time-reversed event stream),
//! both key frames are splatted to the latent time, and the results are
//! fused.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use super::dataset::Dataset;
use crate::error::{Error, Result};
use crate::estimator::{estimate_spline_motion, nonparametric_sample, time_at, EstimatorConfig};
use crate::events::{synthesize_pseudo_frame, EventStream, Frame};
use crate::fusion::{classical_fuse, fuse_multiscale, FusionConfig, FusionInputs, GateParams};
use crate::spline::{FlowSample, SplineField};
use crate::warp::{build_pyramid, softmax_splat, warp_pyramid_with, FeaturePyramid};

/// Motion model used for the latent frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    /// One `K`-point spline per direction, resampled for every latent frame.
    #[default]
    Spline,
    /// A fresh dense flow per latent frame and direction.
    Nonparametric,
    /// A two-point spline: constant velocity fitted to the same anchors.
    Linear,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Spline, Method::Nonparametric, Method::Linear];
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "spline" => Ok(Method::Spline),
            "nonparametric" | "non-parametric" => Ok(Method::Nonparametric),
            "linear" => Ok(Method::Linear),
            other => Err(Error::invalid(format!("unknown method {other:?} (spline, nonparametric, linear)"))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Spline => "spline",
            Method::Nonparametric => "nonparametric",
            Method::Linear => "linear",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FusionMode {
    #[default]
    Classical,
    Gated,
}

impl FromStr for FusionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "classical" => Ok(FusionMode::Classical),
            "gated" => Ok(FusionMode::Gated),
            other => Err(Error::invalid(format!("unknown fusion {other:?} (classical, gated)"))),
        }
    }
}

impl fmt::Display for FusionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FusionMode::Classical => "classical",
            FusionMode::Gated => "gated",
        })
    }
}

#[derive(Debug, Clone, Default)]
pub struct InterpolationConfig {
    pub method: Method,
    pub fusion: FusionMode,
    pub estimator: EstimatorConfig,
    pub fusion_cfg: FusionConfig,
}

/// Uniform insertion times `i / (N + 1)`.
pub fn insertion_times(n: usize) -> Vec<f64> {
    (1..=n).map(|i| i as f64 / (n + 1) as f64).collect()
}

/// Motion of one key-frame pair, both directions.
pub enum GapMotion {
    Splines { forward: SplineField, backward: SplineField },
    /// Nothing is precomputed; each latent frame estimates its own flow.
    PerFrame,
}

/// A key-frame pair with its forward and time-reversed events.
pub struct Gap {
    pub i0: Frame,
    pub i1: Frame,
    pub forward: EventStream,
    /// Events of `(t₀, t₁]` reversed about the window, polarity flipped.
    pub backward: EventStream,
    /// `I₁` and `I₀` re-stamped so the backward pass runs from `t₀` to `t₁`.
    pub back0: Frame,
    pub back1: Frame,
}

impl Gap {
    pub fn new(i0: &Frame, i1: &Frame, events: &EventStream) -> Result<Self> {
        i0.check_geometry(i1, "interpolation")?;
        if i1.t() <= i0.t() {
            return Err(Error::invalid(format!("key frames out of order ({} then {})", i0.t(), i1.t())));
        }
        if events.dims() != i0.dims() {
            return Err(Error::shape(format!("events {:?} vs frames {:?}", events.dims(), i0.dims())));
        }
        let (t0, t1) = (i0.t(), i1.t());
        let forward = EventStream::new(events.width(), events.height(), events.window(t0, t1).to_vec())?;
        Ok(Self {
            i0: i0.clone(),
            i1: i1.clone(),
            backward: events.reversed_window(t0, t1),
            forward,
            back0: i1.clone().with_time(t0),
            back1: i0.clone().with_time(t1),
        })
    }

    /// Runs the estimation stage of `method` (none for non-parametric).
    pub fn estimate(&self, method: Method, cfg: &EstimatorConfig) -> Result<GapMotion> {
        let k = match method {
            Method::Nonparametric => return Ok(GapMotion::PerFrame),
            Method::Spline => cfg.control_points,
            Method::Linear => 2,
        };
        let (forward, backward) = rayon::join(
            || estimate_spline_motion(&self.i0, &self.i1, &self.forward, k, cfg),
            || estimate_spline_motion(&self.back0, &self.back1, &self.backward, k, cfg),
        );
        Ok(GapMotion::Splines { forward: forward?, backward: backward? })
    }

    /// Forward (`I₀ → t`) and backward (`I₁ → t`) flow and priority.
    pub fn motion_at(&self, motion: &GapMotion, t: f64, cfg: &EstimatorConfig) -> Result<(FlowSample, FlowSample)> {
        match motion {
            GapMotion::Splines { forward, backward } => Ok((forward.sample(t)?, backward.sample(1.0 - t)?)),
            GapMotion::PerFrame => {
                let (f, b) = rayon::join(
                    || nonparametric_sample(&self.i0, &self.i1, &self.forward, t, cfg),
                    || nonparametric_sample(&self.back0, &self.back1, &self.backward, 1.0 - t, cfg),
                );
                Ok((f?, b?))
            }
        }
    }

    /// Pseudo-frames at `t` from each key frame.
    pub fn pseudo_frames(&self, t: f64, cfg: &EstimatorConfig) -> Result<(Frame, Frame)> {
        let (c, eps) = (cfg.contrast_threshold, cfg.log_eps);
        let p0 = synthesize_pseudo_frame(&self.i0, &self.forward, time_at(&self.i0, &self.i1, t), c, eps)?;
        let p1 = synthesize_pseudo_frame(&self.back0, &self.backward, time_at(&self.back0, &self.back1, 1.0 - t), c, eps)?;
        Ok((p0, p1))
    }
}

/// Fusion state shared by the latent frames of one gap.
pub enum Fuser<'a> {
    Classical,
    Gated {
        params: &'a GateParams,
        cfg: &'a FusionConfig,
        key0: FeaturePyramid,
        key1: FeaturePyramid,
    },
}

impl<'a> Fuser<'a> {
    pub fn new(gap: &Gap, mode: FusionMode, cfg: &'a FusionConfig, params: Option<&'a GateParams>) -> Result<Self> {
        match mode {
            FusionMode::Classical => Ok(Fuser::Classical),
            FusionMode::Gated => {
                let params = params.ok_or_else(|| Error::invalid("gated fusion needs parameters"))?;
                let key0 = build_pyramid(gap.i0.data().view(), cfg.depth, cfg.base_channels)?;
                let key1 = build_pyramid(gap.i1.data().view(), cfg.depth, cfg.base_channels)?;
                Ok(Fuser::Gated { params, cfg, key0, key1 })
            }
        }
    }

    pub fn fuse(&self, gap: &Gap, t: f64, forward: &FlowSample, backward: &FlowSample, pseudo: &(Frame, Frame)) -> Result<Frame> {
        let t_us = time_at(&gap.i0, &gap.i1, t);
        match self {
            Fuser::Classical => {
                let w0 = softmax_splat(gap.i0.data().view(), &forward.flow, forward.priority.view())?;
                let w1 = softmax_splat(gap.i1.data().view(), &backward.flow, backward.priority.view())?;
                Ok(classical_fuse(&w0, &w1, &pseudo.0, &pseudo.1, t)?.with_time(t_us))
            }
            Fuser::Gated { params, cfg, key0, key1 } => {
                let warp0 = warp_pyramid_with(key0, &forward.flow, &forward.priority)?;
                let warp1 = warp_pyramid_with(key1, &backward.flow, &backward.priority)?;
                let synth0 = build_pyramid(pseudo.0.data().view(), cfg.depth, cfg.base_channels)?;
                let synth1 = build_pyramid(pseudo.1.data().view(), cfg.depth, cfg.base_channels)?;
                let inputs = FusionInputs { warp0: &warp0, warp1: &warp1, synth0: &synth0, synth1: &synth1, t, t_us };
                Ok(fuse_multiscale(&inputs, params, cfg)?.frame)
            }
        }
    }
}

/// Latent frames of one key-frame pair at normalized `times`.
pub fn interpolate_pair(
    i0: &Frame,
    i1: &Frame,
    events: &EventStream,
    times: &[f64],
    cfg: &InterpolationConfig,
    params: Option<&GateParams>,
) -> Result<Vec<Frame>> {
    if let Some(t) = times.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(Error::invalid(format!("insertion time {t} outside [0, 1]")));
    }
    let gap = Gap::new(i0, i1, events)?;
    let motion = gap.estimate(cfg.method, &cfg.estimator)?;
    let fuser = Fuser::new(&gap, cfg.fusion, &cfg.fusion_cfg, params)?;
    times
        .iter()
        .map(|&t| {
            let (f, b) = gap.motion_at(&motion, t, &cfg.estimator)?;
            let pseudo = gap.pseudo_frames(t, &cfg.estimator)?;
            fuser.fuse(&gap, t, &f, &b, &pseudo)
        })
        .collect()
}

/// Key-frame indices under the skip protocol: every `(skip + 1)`-th frame.
pub fn keyframe_indices(frames: usize, skip: usize) -> Vec<usize> {
    (0..frames).step_by(skip + 1).collect()
}

/// Output of [`interpolate`]: key frames and inserted frames in time order.
#[derive(Debug, Clone)]
pub struct Interpolated {
    pub frames: Vec<Frame>,
    /// Whether each output frame is an inserted (latent) frame.
    pub inserted: Vec<bool>,
}

/// Keeps every `(skip + 1)`-th frame as a key frame and inserts `n` frames
/// at `i / (n + 1)` into each gap. Withheld frames are not used. Gaps run
/// in parallel.
pub fn interpolate(ds: &Dataset, skip: usize, n: usize, cfg: &InterpolationConfig) -> Result<Interpolated> {
    let keys = keyframe_indices(ds.frames.len(), skip);
    if keys.len() < 2 {
        return Err(Error::invalid(format!(
            "{} frames leave fewer than two key frames with skip {skip}",
            ds.frames.len()
        )));
    }
    let params = gate_params(ds, cfg)?;
    let events = ds.aligned_events();
    let times = insertion_times(n);
    let gaps: Vec<Vec<Frame>> = keys
        .par_windows(2)
        .map(|w| interpolate_pair(&ds.frames[w[0]], &ds.frames[w[1]], &events, &times, cfg, params.as_ref()))
        .collect::<Result<_>>()?;
    let mut frames = Vec::new();
    let mut inserted = Vec::new();
    for (k, latent) in keys.windows(2).zip(gaps) {
        frames.push(ds.frames[k[0]].clone());
        inserted.push(false);
        inserted.extend(std::iter::repeat_n(true, latent.len()));
        frames.extend(latent);
    }
    frames.push(ds.frames[*keys.last().unwrap()].clone());
    inserted.push(false);
    Ok(Interpolated { frames, inserted })
}

pub(crate) fn gate_params(ds: &Dataset, cfg: &InterpolationConfig) -> Result<Option<GateParams>> {
    match cfg.fusion {
        FusionMode::Classical => Ok(None),
        FusionMode::Gated => Ok(Some(cfg.fusion_cfg.load_params(ds.frames[0].channels())?)),
    }
}
