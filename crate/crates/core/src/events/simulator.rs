//! Ideal contrast-threshold event simulator.
//!
//! Each pixel integrates log intensity, interpolated linearly in time between
//! consecutive frames, and fires an event whenever the signal moves a full
//! threshold away from its last reference level. Crossing times are solved
//! per segment in closed form.

use rayon::prelude::*;

use super::frame::Frame;
use super::stream::{Event, EventStream, Polarity};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulatorConfig {
    /// Contrast threshold in log-intensity units.
    pub contrast_threshold: f64,
    /// Minimum time between two events of one pixel, microseconds.
    pub refractory_us: u64,
    /// Offset added to intensities before taking the logarithm.
    pub log_eps: f64,
}

impl Default for SimulatorConfig {
    fn default() -> Self {
        Self {
            contrast_threshold: 0.1,
            refractory_us: 0,
            log_eps: 1e-3,
        }
    }
}

impl SimulatorConfig {
    pub fn with_threshold(contrast_threshold: f64) -> Self {
        Self { contrast_threshold, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.contrast_threshold > 0.0 && self.contrast_threshold.is_finite()) {
            return Err(Error::invalid(format!(
                "contrast threshold must be positive, got {}",
                self.contrast_threshold
            )));
        }
        if !(self.log_eps > 0.0 && self.log_eps.is_finite()) {
            return Err(Error::invalid("log epsilon must be positive"));
        }
        Ok(())
    }
}

/// Converts a time-stamped frame sequence to events. Color frames are
/// converted to luma first.
pub fn simulate_events(frames: &[Frame], cfg: &SimulatorConfig) -> Result<EventStream> {
    cfg.validate()?;
    if frames.len() < 2 {
        return Err(Error::invalid("event simulation needs at least two frames"));
    }
    for pair in frames.windows(2) {
        pair[0].check_geometry(&pair[1], "event simulation")?;
        if pair[1].t() <= pair[0].t() {
            return Err(Error::invalid(format!(
                "frame timestamps must increase strictly ({} then {})",
                pair[0].t(),
                pair[1].t()
            )));
        }
    }
    let (h, w) = frames[0].dims();
    let logs: Vec<Vec<f64>> = frames
        .iter()
        .map(|f| f.luma().iter().map(|v| (v + cfg.log_eps).ln()).collect())
        .collect();
    let times: Vec<u64> = frames.iter().map(Frame::t).collect();

    let rows: Vec<Vec<Event>> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut out = Vec::new();
            for x in 0..w {
                let i = y * w + x;
                let trace: Vec<f64> = logs.iter().map(|l| l[i]).collect();
                pixel_events(&trace, &times, cfg, x as u16, y as u16, &mut out);
            }
            out
        })
        .collect();

    let mut events: Vec<Event> = rows.into_iter().flatten().collect();
    // stable: same-time events keep row-major, then per-pixel firing order
    events.sort_by_key(|e| e.t);
    EventStream::new(w as u32, h as u32, events)
}

fn pixel_events(trace: &[f64], times: &[u64], cfg: &SimulatorConfig, x: u16, y: u16, out: &mut Vec<Event>) {
    let c = cfg.contrast_threshold;
    let base = trace[0];
    // reference level is base + level·c; tracking the integer level keeps the
    // emitted polarity sum exactly consistent with the reference
    let mut level: i64 = 0;
    let mut last_fire: Option<u64> = None;

    for seg in 0..trace.len() - 1 {
        let (la, lb) = (trace[seg], trace[seg + 1]);
        let (ta, tb) = (times[seg], times[seg + 1]);
        let span = tb - ta;
        if lb == la {
            continue;
        }
        let step: i64 = if lb > la { 1 } else { -1 };
        loop {
            let target = base + (level + step) as f64 * c;
            let crossed = if step > 0 { target <= lb } else { target >= lb };
            if !crossed {
                break;
            }
            level += step;
            let frac = (target - la) / (lb - la);
            let offset = ((frac * span as f64).round() as u64).clamp(1, span);
            let t = ta + offset;
            if let Some(prev) = last_fire {
                if t - prev < cfg.refractory_us {
                    continue;
                }
            }
            last_fire = Some(t);
            let polarity = if step > 0 { Polarity::Positive } else { Polarity::Negative };
            out.push(Event::new(t, x, y, polarity));
        }
    }
}
