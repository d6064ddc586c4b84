use ndarray::{Array3, ArrayView3, Axis};

use crate::error::{Error, Result};
use crate::spline::FlowField;
use crate::tensor::sample_bilinear_clamped;

/// `out(q) = src(q + flow(q))`, bilinear, sample positions clamped to the
/// image border.
pub fn backward_warp_bilinear(src: ArrayView3<'_, f64>, flow: &FlowField) -> Result<Array3<f64>> {
    let (c, h, w) = src.dim();
    if flow.dims() != (h, w) {
        return Err(Error::shape(format!("warp source {:?} vs flow {:?}", (h, w), flow.dims())));
    }
    let (u, v) = (flow.u(), flow.v());
    let mut out = Array3::zeros((c, h, w));
    for ch in 0..c {
        let plane = src.index_axis(Axis(0), ch);
        let mut dst = out.index_axis_mut(Axis(0), ch);
        for y in 0..h {
            for x in 0..w {
                dst[[y, x]] = sample_bilinear_clamped(plane, x as f64 + u[[y, x]], y as f64 + v[[y, x]]);
            }
        }
    }
    Ok(out)
}
