//! Spatial alignment of an event stream to a frame pair.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::events::{event_integral, EventStream, Frame};

/// Offset `(dx, dy)` of the events relative to the frames: the event at
/// `q + (dx, dy)` belongs to frame pixel `q`. Every integer shift in
/// `[-radius, radius]²` is scored by the zero-normalized cross-correlation,
/// over the overlap, of `|event integral|` and `|ΔI|` (luma). Ties go to the
/// smallest shift, then lexicographically smallest `(dx, dy)`.
pub fn align_streams(ev: &EventStream, i0: &Frame, i1: &Frame, radius: u32) -> Result<(i32, i32)> {
    i0.check_geometry(i1, "alignment")?;
    if ev.dims() != i0.dims() {
        return Err(Error::shape(format!("events {:?} vs frames {:?}", ev.dims(), i0.dims())));
    }
    let (t0, t1) = (i0.t().min(i1.t()), i0.t().max(i1.t()));
    if ev.window(t0, t1).is_empty() {
        return Err(Error::invalid(format!("no events between {t0} and {t1} µs to align with")));
    }
    let events = event_integral(ev, t0, t1, 1.0).mapv(f64::abs);
    let diff = (i1.luma() - i0.luma()).mapv(f64::abs);
    if variance(&diff) == 0.0 {
        return Err(Error::invalid("frame difference has zero variance; alignment score undefined"));
    }
    if variance(&events) == 0.0 {
        return Err(Error::invalid("event integral has zero variance; alignment score undefined"));
    }

    let r = radius as i32;
    let mut shifts: Vec<(i32, i32)> = (-r..=r).flat_map(|dx| (-r..=r).map(move |dy| (dx, dy))).collect();
    shifts.sort_by_key(|&(dx, dy)| (dx * dx + dy * dy, dx, dy));
    let mut best: Option<((i32, i32), f64)> = None;
    for s in shifts {
        let Some(score) = zncc_shifted(&diff, &events, s) else { continue };
        if best.is_none_or(|(_, b)| score > b) {
            best = Some((s, score));
        }
    }
    best.map(|(s, _)| s)
        .ok_or_else(|| Error::invalid("no shift has a defined correlation score"))
}

fn variance(a: &Array2<f64>) -> f64 {
    let m = a.mean().unwrap_or(0.0);
    a.iter().map(|v| (v - m).powi(2)).sum::<f64>() / a.len() as f64
}

/// ZNCC of `a(q)` and `b(q + s)` over the pixels where both exist; `None`
/// when the overlap is empty or either side is constant on it.
fn zncc_shifted(a: &Array2<f64>, b: &Array2<f64>, (dx, dy): (i32, i32)) -> Option<f64> {
    let (h, w) = (a.nrows() as i32, a.ncols() as i32);
    let (x0, x1) = (0.max(-dx), w.min(w - dx));
    let (y0, y1) = (0.max(-dy), h.min(h - dy));
    if x0 >= x1 || y0 >= y1 {
        return None;
    }
    let n = f64::from((x1 - x0) * (y1 - y0));
    let (mut sa, mut sb) = (0.0, 0.0);
    for y in y0..y1 {
        for x in x0..x1 {
            sa += a[[y as usize, x as usize]];
            sb += b[[(y + dy) as usize, (x + dx) as usize]];
        }
    }
    let (ma, mb) = (sa / n, sb / n);
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for y in y0..y1 {
        for x in x0..x1 {
            let p = a[[y as usize, x as usize]] - ma;
            let q = b[[(y + dy) as usize, (x + dx) as usize]] - mb;
            cov += p * q;
            va += p * p;
            vb += q * q;
        }
    }
    if va == 0.0 || vb == 0.0 {
        return None;
    }
    Some(cov / (va * vb).sqrt())
}
