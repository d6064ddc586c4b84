//! Spline motion from key frames and events.
//!
//! Events integrated onto the key frame give pseudo-frames at intermediate
//! times; dense flow from the key frame to each of them anchors the
//! trajectory between the frames, and flow between the two key frames
//! anchors its end. A `K`-point spline is fitted through all anchors, and
//! its priority channel is set from the photometric consistency of the
//! fitted motion.

use ndarray::{Array2, Array3};
use rayon::prelude::*;

use super::config::{EstimatorConfig, MotionMode};
use super::flow::{dense_flow, photometric_residual};
use crate::error::{Error, Result};
use crate::events::{synthesize_pseudo_frame_compensated, EventStream, Frame};
use crate::spline::{fit_spline, FlowField, FlowSample, SplineField};

/// Intensity of the flat base frame used when only events are available.
pub const EVENTS_ONLY_BASE: f64 = 0.5;

/// Microsecond timestamp of normalized time `t` between two frames.
pub fn time_at(i0: &Frame, i1: &Frame, t: f64) -> u64 {
    let span = (i1.t() - i0.t()) as f64;
    i0.t() + (t * span).round() as u64
}

fn check_pair(i0: &Frame, i1: &Frame, ev: &EventStream) -> Result<()> {
    i0.check_geometry(i1, "motion estimation")?;
    if i1.t() <= i0.t() {
        return Err(Error::invalid(format!("key frames out of order ({} then {})", i0.t(), i1.t())));
    }
    if ev.dims() != i0.dims() {
        return Err(Error::shape(format!("events {:?} vs frames {:?}", ev.dims(), i0.dims())));
    }
    Ok(())
}

/// Estimates the spline field `S₀→₁` of `k` control points.
pub fn estimate_spline_motion(i0: &Frame, i1: &Frame, ev: &EventStream, k: usize, cfg: &EstimatorConfig) -> Result<SplineField> {
    cfg.validate()?;
    check_pair(i0, i1, ev)?;
    if k < 2 {
        return Err(Error::invalid("spline needs at least 2 control points"));
    }
    if cfg.samples < k {
        return Err(Error::invalid(format!("{} sample times cannot constrain {k} control points", cfg.samples)));
    }
    let (h, w) = i0.dims();
    let control_times: Vec<f64> = (0..k).map(|j| j as f64 / (k - 1) as f64).collect();

    match cfg.mode {
        MotionMode::Images => {
            let endpoint = dense_flow(i0, i1, cfg)?;
            // no intermediate observations: every control point is checked
            // against the far key frame with the endpoint flow
            let residual = photometric_residual(i0, i1, &endpoint)?;
            let priority = residual.mapv(|r| -cfg.priority_beta * r);
            let mut field = SplineField::linear(&endpoint, priority.view(), k)?;
            let mut planes = Array3::from_shape_fn((k, h, w), |(_, y, x)| priority[[y, x]]);
            planes.index_axis_mut(ndarray::Axis(0), 0).fill(0.0);
            field = field.with_priority(&planes)?;
            Ok(field)
        }
        MotionMode::Both | MotionMode::Events => {
            let base = match cfg.mode {
                MotionMode::Both => i0.clone(),
                _ => {
                    if ev.window(i0.t(), i1.t()).is_empty() {
                        return Err(Error::invalid("no events between the key frames for events-only estimation"));
                    }
                    flat_base(i0)
                }
            };
            let times: Vec<f64> = (1..=cfg.samples).map(|m| m as f64 / cfg.samples as f64).collect();
            let mut samples: Vec<FlowSample> = times
                .par_iter()
                .map(|&t| {
                    let pseudo = pseudo_frame(&base, ev, time_at(i0, i1, t), cfg)?;
                    let flow = dense_flow(&base, &pseudo, cfg)?;
                    Ok(FlowSample { t, flow, priority: Array2::zeros((h, w)) })
                })
                .collect::<Result<_>>()?;
            if cfg.mode == MotionMode::Both {
                samples.push(FlowSample { t: 1.0, flow: dense_flow(i0, i1, cfg)?, priority: Array2::zeros((h, w)) });
            }
            let field = fit_spline(&samples, k)?;

            // priority from photometric consistency at the control times
            let references: Vec<Frame> = control_times
                .iter()
                .map(|&t| match (cfg.mode, t == 1.0) {
                    (MotionMode::Both, true) => Ok(i1.clone()),
                    _ => pseudo_frame(&base, ev, time_at(i0, i1, t), cfg),
                })
                .collect::<Result<_>>()?;
            let flows: Vec<FlowField> = control_times
                .iter()
                .map(|&t| field.sample(t).map(|s| s.flow))
                .collect::<Result<_>>()?;
            let priority = estimate_priority(&base, &references, &flows, cfg.priority_beta)?;
            field.with_priority(&priority)
        }
    }
}

fn flat_base(like: &Frame) -> Frame {
    let data = Array3::from_elem(like.data().dim(), EVENTS_ONLY_BASE);
    Frame::new(like.t(), data).expect("constant in range")
}

/// Motion anchors use the lag-compensated integral; see
/// [`crate::events::event_integral_compensated`].
fn pseudo_frame(base: &Frame, ev: &EventStream, t_us: u64, cfg: &EstimatorConfig) -> Result<Frame> {
    synthesize_pseudo_frame_compensated(base, ev, t_us, cfg.contrast_threshold, cfg.log_eps)
}

/// Priority control points: `−β · |I₀(q) − R_k(q + F_k(q))|`, channel mean,
/// where `R_k` is the reference frame at control time `k` and `F_k` the flow
/// there. Pixels whose motion explains the reference get the highest
/// priority (zero).
pub fn estimate_priority(key: &Frame, references: &[Frame], flows: &[FlowField], beta: f64) -> Result<Array3<f64>> {
    if references.len() != flows.len() || references.is_empty() {
        return Err(Error::invalid("need one reference frame per flow"));
    }
    let (h, w) = key.dims();
    let mut out = Array3::zeros((flows.len(), h, w));
    for (k, (r, f)) in references.iter().zip(flows).enumerate() {
        let residual = photometric_residual(key, r, f)?;
        out.index_axis_mut(ndarray::Axis(0), k).assign(&residual.mapv(|v| -beta * v));
    }
    Ok(out)
}

/// Per-latent-frame motion: one full dense flow from `I₀` to the
/// pseudo-frame at `t`. No work is shared between different `t`.
pub fn nonparametric_motion(i0: &Frame, i1: &Frame, ev: &EventStream, t: f64, cfg: &EstimatorConfig) -> Result<FlowField> {
    nonparametric_sample(i0, i1, ev, t, cfg).map(|s| s.flow)
}

/// [`nonparametric_motion`] plus the photometric priority of the result.
pub fn nonparametric_sample(i0: &Frame, i1: &Frame, ev: &EventStream, t: f64, cfg: &EstimatorConfig) -> Result<FlowSample> {
    cfg.validate()?;
    check_pair(i0, i1, ev)?;
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::invalid(format!("normalized time {t} outside [0, 1]")));
    }
    let pseudo = pseudo_frame(i0, ev, time_at(i0, i1, t), cfg)?;
    let flow = dense_flow(i0, &pseudo, cfg)?;
    let priority = photometric_residual(i0, &pseudo, &flow)?.mapv(|r| -cfg.priority_beta * r);
    Ok(FlowSample { t, flow, priority })
}
