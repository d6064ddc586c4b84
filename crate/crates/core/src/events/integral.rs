use ndarray::Array2;

use super::frame::Frame;
use super::stream::{Event, EventStream};
use crate::error::{Error, Result};

/// Per-pixel log-brightness change `c · Σ polarity` over events in
/// `(t_a, t_b]`.
pub fn event_integral(ev: &EventStream, t_a: u64, t_b: u64, c: f64) -> Array2<f64> {
    let mut counts = Array2::<i64>::zeros(ev.dims());
    if t_a < t_b {
        accumulate(&mut counts, ev.window(t_a, t_b));
    }
    counts.mapv(|n| c * n as f64)
}

fn accumulate(counts: &mut Array2<i64>, events: &[Event]) {
    for e in events {
        counts[[e.y as usize, e.x as usize]] += i64::from(e.polarity.sign());
    }
}

/// Adds the event integral since `key.t()` to the key frame in the log
/// domain: `exp(log(I + ε) + E) − ε`, clamped to `[0, 1]`. Color frames get
/// the same (luma-derived) change on every channel.
pub fn synthesize_pseudo_frame(key: &Frame, ev: &EventStream, t: u64, c: f64, log_eps: f64) -> Result<Frame> {
    if t < key.t() {
        return Err(Error::invalid(format!(
            "pseudo-frame time {t} precedes key frame time {}",
            key.t()
        )));
    }
    if ev.dims() != key.dims() {
        return Err(Error::shape(format!(
            "events {:?} vs frame {:?}",
            ev.dims(),
            key.dims()
        )));
    }
    if ev.window(key.t(), t).is_empty() {
        return Ok(key.clone().with_time(t));
    }
    apply_log_change(key, &event_integral(ev, key.t(), t, c), t, log_eps)
}

/// Event integral with each firing pixel moved half a threshold further in
/// the direction of its last event: `c · (Σ p + p_last / 2)`.
///
/// An ideal sensor pixel that last fired with polarity `p` has since moved
/// by less than one threshold, usually onward in the direction of `p`, so
/// the plain integral lags the true change. Pixels without events are left
/// at zero.
pub fn event_integral_compensated(ev: &EventStream, t_a: u64, t_b: u64, c: f64) -> Array2<f64> {
    let mut counts = Array2::<i64>::zeros(ev.dims());
    let mut last = Array2::<i8>::zeros(ev.dims());
    if t_a < t_b {
        for e in ev.window(t_a, t_b) {
            let (y, x) = (e.y as usize, e.x as usize);
            counts[[y, x]] += i64::from(e.polarity.sign());
            last[[y, x]] = e.polarity.sign();
        }
    }
    let mut out = counts.mapv(|n| c * n as f64);
    out.zip_mut_with(&last, |v, l| *v += 0.5 * c * f64::from(*l));
    out
}

/// [`synthesize_pseudo_frame`] on the compensated integral.
pub fn synthesize_pseudo_frame_compensated(key: &Frame, ev: &EventStream, t: u64, c: f64, log_eps: f64) -> Result<Frame> {
    let plain = synthesize_pseudo_frame(key, ev, t, c, log_eps)?;
    if ev.window(key.t(), t).is_empty() {
        return Ok(plain);
    }
    apply_log_change(key, &event_integral_compensated(ev, key.t(), t, c), t, log_eps)
}

/// `exp(log(I + ε) + change) − ε` per channel, clamped.
fn apply_log_change(key: &Frame, change: &Array2<f64>, t: u64, log_eps: f64) -> Result<Frame> {
    let mut data = key.data().clone();
    for mut plane in data.outer_iter_mut() {
        plane.zip_mut_with(change, |v, d| {
            if *d != 0.0 {
                *v = ((*v + log_eps).ln() + d).exp() - log_eps;
            }
        });
    }
    Frame::from_clamped(t, data)
}
