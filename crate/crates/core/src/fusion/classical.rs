use ndarray::{Array2, Array3, ArrayView2, ArrayView3, Zip};

use crate::error::{Error, Result};
use crate::events::Frame;
use crate::spline::check_time;
use crate::warp::SplatResult;

/// Non-learned fusion of two warped keyframes and two pseudo-frames.
///
/// Per pixel: both warps valid → `(1−t)·w₀ + t·w₁`; one valid → that one;
/// neither → `(1−t)·s₀ + t·s₁`. The result is clamped to `[0, 1]` and
/// stamped with the pseudo-frames' time.
pub fn classical_fuse(warped0: &SplatResult, warped1: &SplatResult, pseudo0: &Frame, pseudo1: &Frame, t: f64) -> Result<Frame> {
    check_time(t)?;
    pseudo0.check_geometry(pseudo1, "classical fusion")?;
    let dims = pseudo0.data().dim();
    if warped0.warped.dim() != dims || warped1.warped.dim() != dims {
        return Err(Error::shape(format!(
            "warped {:?} / {:?} vs pseudo-frames {:?}",
            warped0.warped.dim(),
            warped1.warped.dim(),
            dims
        )));
    }
    let out = blend(
        warped0.warped.view(),
        warped0.holes.view(),
        warped1.warped.view(),
        warped1.holes.view(),
        pseudo0.data().view(),
        pseudo1.data().view(),
        t,
    );
    Frame::from_clamped(pseudo0.t(), out)
}

pub(crate) fn blend(
    w0: ArrayView3<'_, f64>,
    holes0: ArrayView2<'_, bool>,
    w1: ArrayView3<'_, f64>,
    holes1: ArrayView2<'_, bool>,
    s0: ArrayView3<'_, f64>,
    s1: ArrayView3<'_, f64>,
    t: f64,
) -> Array3<f64> {
    let mut out = Array3::zeros(w0.dim());
    for (c, mut plane) in out.outer_iter_mut().enumerate() {
        Zip::indexed(&mut plane).for_each(|(y, x), o| {
            let (h0, h1) = (holes0[[y, x]], holes1[[y, x]]);
            *o = match (h0, h1) {
                (false, false) => (1.0 - t) * w0[[c, y, x]] + t * w1[[c, y, x]],
                (false, true) => w0[[c, y, x]],
                (true, false) => w1[[c, y, x]],
                (true, true) => (1.0 - t) * s0[[c, y, x]] + t * s1[[c, y, x]],
            };
        });
    }
    out
}

/// Fraction of pixels where neither warp is valid.
pub fn double_hole_fraction(holes0: &Array2<bool>, holes1: &Array2<bool>) -> f64 {
    let both = holes0.iter().zip(holes1.iter()).filter(|(a, b)| **a && **b).count();
    both as f64 / holes0.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn splat(values: Array3<f64>, holes: Array2<bool>) -> SplatResult {
        let weight = holes.mapv(|h| if h { 0.0 } else { 1.0 });
        SplatResult { warped: values, weight, holes }
    }

    fn fixture() -> (SplatResult, SplatResult, Frame, Frame) {
        let mut h0 = Array2::from_elem((2, 2), false);
        let mut h1 = Array2::from_elem((2, 2), false);
        h0[[0, 1]] = true;
        h1[[1, 0]] = true;
        h0[[1, 1]] = true;
        h1[[1, 1]] = true;
        (
            splat(Array3::from_elem((1, 2, 2), 0.2), h0),
            splat(Array3::from_elem((1, 2, 2), 0.6), h1),
            Frame::new(7, Array3::from_elem((1, 2, 2), 0.1)).unwrap(),
            Frame::new(7, Array3::from_elem((1, 2, 2), 0.5)).unwrap(),
        )
    }

    #[test]
    fn rules_per_pixel() {
        let (a, b, p, q) = fixture();
        let out = classical_fuse(&a, &b, &p, &q, 0.25).unwrap();
        let d = out.data();
        assert!((d[[0, 0, 0]] - (0.75 * 0.2 + 0.25 * 0.6)).abs() < 1e-15);
        assert_eq!(d[[0, 0, 1]], 0.6);
        assert_eq!(d[[0, 1, 0]], 0.2);
        assert!((d[[0, 1, 1]] - (0.75 * 0.1 + 0.25 * 0.5)).abs() < 1e-15);
        assert_eq!(out.t(), 7);
    }

    #[test]
    fn midpoint_of_pseudo_frames_in_double_holes() {
        let (a, b, p, q) = fixture();
        let out = classical_fuse(&a, &b, &p, &q, 0.5).unwrap();
        assert!((out.data()[[0, 1, 1]] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn boundary_identities() {
        let (a, b, p, q) = fixture();
        let at0 = classical_fuse(&a, &b, &p, &q, 0.0).unwrap();
        assert_eq!(at0.data()[[0, 0, 0]], 0.2);
        let at1 = classical_fuse(&a, &b, &p, &q, 1.0).unwrap();
        assert_eq!(at1.data()[[0, 0, 0]], 0.6);
    }

    #[test]
    fn geometry_and_time_errors() {
        let (a, b, p, _) = fixture();
        let wrong = Frame::new(7, Array3::from_elem((1, 3, 2), 0.5)).unwrap();
        assert!(classical_fuse(&a, &b, &p, &wrong, 0.5).is_err());
        assert!(classical_fuse(&a, &b, &p, &p, 1.5).is_err());
    }
}
