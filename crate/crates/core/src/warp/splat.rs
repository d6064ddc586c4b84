//! Forward warping by softmax splatting.
//!
//! Every source pixel is pushed to `q + flow(q)` and spread over the four
//! surrounding target pixels with bilinear weights, scaled by
//! `exp(priority(q) − max priority)`. Targets normalize by their
//! accumulated weight. Accumulation runs in source row-major order, so the
//! result is independent of scheduling.

use ndarray::{Array2, Array3, ArrayView2, ArrayView3, Axis};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::spline::FlowField;

/// Targets whose accumulated weight is below this are holes.
pub const HOLE_WEIGHT: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct SplatResult {
    /// `C×H×W`; zero at holes.
    pub warped: Array3<f64>,
    /// Accumulated softmax weight per target pixel.
    pub weight: Array2<f64>,
    /// `true` where `weight < HOLE_WEIGHT`.
    pub holes: Array2<bool>,
}

impl SplatResult {
    pub fn hole_count(&self) -> usize {
        self.holes.iter().filter(|h| **h).count()
    }
}

/// One bilinear footprint corner: flat target index and weight.
#[derive(Clone, Copy)]
struct Corner {
    target: usize,
    weight: f64,
}

/// Forward-warps `src` (`C×H×W`) with `flow` and softmax `priority`.
pub fn softmax_splat(src: ArrayView3<'_, f64>, flow: &FlowField, priority: ArrayView2<'_, f64>) -> Result<SplatResult> {
    let (c, h, w) = src.dim();
    if flow.dims() != (h, w) || priority.dim() != (h, w) {
        return Err(Error::shape(format!(
            "splat source {:?}, flow {:?}, priority {:?}",
            (h, w),
            flow.dims(),
            priority.dim()
        )));
    }
    if !flow.is_finite() {
        return Err(Error::invalid("non-finite flow"));
    }
    if priority.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite priority"));
    }
    let pmax = priority.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    // footprints in source row-major order
    let mut footprints: Vec<[Option<Corner>; 4]> = Vec::with_capacity(h * w);
    let (u, v) = (flow.u(), flow.v());
    for y in 0..h {
        for x in 0..w {
            let z = (priority[[y, x]] - pmax).exp();
            footprints.push(footprint(x as f64 + u[[y, x]], y as f64 + v[[y, x]], z, h, w));
        }
    }

    let mut weight = Array2::<f64>::zeros((h, w));
    {
        let flat = weight.as_slice_mut().expect("standard layout");
        for fp in &footprints {
            for corner in fp.iter().flatten() {
                flat[corner.target] += corner.weight;
            }
        }
    }

    let planes: Vec<Array2<f64>> = (0..c)
        .into_par_iter()
        .map(|ch| {
            let plane = src.index_axis(Axis(0), ch);
            let mut acc = vec![0.0; h * w];
            for (i, fp) in footprints.iter().enumerate() {
                let value = plane[[i / w, i % w]];
                for corner in fp.iter().flatten() {
                    acc[corner.target] += corner.weight * value;
                }
            }
            Array2::from_shape_vec((h, w), acc).expect("sized")
        })
        .collect();

    let holes = weight.mapv(|wt| wt < HOLE_WEIGHT);
    let mut warped = Array3::<f64>::zeros((c, h, w));
    for (ch, acc) in planes.into_iter().enumerate() {
        let mut out = warped.index_axis_mut(Axis(0), ch);
        ndarray::Zip::from(&mut out)
            .and(&acc)
            .and(&weight)
            .and(&holes)
            .for_each(|o, a, wt, hole| {
                *o = if *hole { 0.0 } else { a / wt };
            });
    }
    Ok(SplatResult { warped, weight, holes })
}

#[inline]
fn footprint(tx: f64, ty: f64, z: f64, h: usize, w: usize) -> [Option<Corner>; 4] {
    let x0 = tx.floor();
    let y0 = ty.floor();
    let ax = tx - x0;
    let ay = ty - y0;
    let corner = |cx: f64, cy: f64, bw: f64| -> Option<Corner> {
        if bw <= 0.0 || cx < 0.0 || cy < 0.0 || cx >= w as f64 || cy >= h as f64 {
            return None;
        }
        Some(Corner {
            target: cy as usize * w + cx as usize,
            weight: z * bw,
        })
    };
    [
        corner(x0, y0, (1.0 - ax) * (1.0 - ay)),
        corner(x0 + 1.0, y0, ax * (1.0 - ay)),
        corner(x0, y0 + 1.0, (1.0 - ax) * ay),
        corner(x0 + 1.0, y0 + 1.0, ax * ay),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array3;
    use proptest::prelude::*;

    #[test]
    fn zero_flow_is_identity() {
        let src = Array3::from_shape_fn((2, 4, 5), |(c, y, x)| (c * 20 + y * 5 + x) as f64 * 0.1);
        let r = softmax_splat(src.view(), &FlowField::zeros(4, 5), Array2::from_elem((4, 5), 3.0).view()).unwrap();
        assert_eq!(r.warped, src);
        assert_eq!(r.hole_count(), 0);
    }

    fn collision(z1: f64, z2: f64) -> f64 {
        // pixels (0,0) and (2,0) both land on (1,0)
        let mut src = Array3::zeros((1, 1, 3));
        src[[0, 0, 0]] = 0.9;
        src[[0, 0, 2]] = 0.3;
        let mut flow = FlowField::zeros(1, 3).into_data();
        flow[[0, 0, 0]] = 1.0;
        flow[[0, 0, 1]] = 5.0;
        flow[[0, 0, 2]] = -1.0;
        let mut prio = Array2::zeros((1, 3));
        prio[[0, 0]] = z1;
        prio[[0, 2]] = z2;
        let r = softmax_splat(src.view(), &FlowField::new(flow).unwrap(), prio.view()).unwrap();
        assert!(r.holes[[0, 0]] && r.holes[[0, 2]] && !r.holes[[0, 1]]);
        r.warped[[0, 0, 1]]
    }

    #[test]
    fn equal_priority_collision_averages() {
        assert!((collision(0.0, 0.0) - 0.6).abs() < 1e-15);
    }

    #[test]
    fn weighted_collision() {
        let expected = (2.0 * 0.9 + 0.3) / 3.0;
        assert!((collision(2f64.ln(), 0.0) - expected).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        let src = Array3::zeros((1, 2, 2));
        let mut flow = FlowField::zeros(2, 2).into_data();
        flow[[1, 0, 0]] = f64::NAN;
        assert!(softmax_splat(src.view(), &FlowField::new(flow).unwrap(), Array2::zeros((2, 2)).view()).is_err());
        assert!(softmax_splat(src.view(), &FlowField::zeros(2, 3), Array2::zeros((2, 2)).view()).is_err());
    }

    fn arb_case() -> impl Strategy<Value = (Array3<f64>, FlowField, Array2<f64>)> {
        let n = 6 * 7;
        (
            prop::collection::vec(0.0f64..1.0, 2 * n),
            prop::collection::vec(-1.4f64..1.4, 2 * n),
            prop::collection::vec(-3.0f64..3.0, n),
        )
            .prop_map(|(s, f, p)| {
                (
                    Array3::from_shape_vec((2, 6, 7), s).unwrap(),
                    FlowField::new(Array3::from_shape_vec((2, 6, 7), f).unwrap()).unwrap(),
                    Array2::from_shape_vec((6, 7), p).unwrap(),
                )
            })
    }

    proptest! {
        #[test]
        fn priority_shift_invariance((src, flow, prio) in arb_case(), shift in -50.0f64..50.0) {
            let a = softmax_splat(src.view(), &flow, prio.view()).unwrap();
            let b = softmax_splat(src.view(), &flow, (&prio + shift).view()).unwrap();
            for (x, y) in a.warped.iter().zip(b.warped.iter()) {
                prop_assert!((x - y).abs() <= 1e-6);
            }
        }

        #[test]
        fn conservation_with_uniform_priority(src in prop::collection::vec(0.0f64..1.0, 8 * 8), f in prop::collection::vec(0.0f64..0.99, 2)) {
            // interior sources shifted by < 1 px stay inside the 8×8 target
            let src = Array3::from_shape_vec((1, 8, 8), src).unwrap();
            let mut src_in = Array3::zeros((1, 8, 8));
            src_in.slice_mut(ndarray::s![.., 0..7, 0..7]).assign(&src.slice(ndarray::s![.., 0..7, 0..7]));
            let flow = FlowField::constant(8, 8, f[0], f[1]);
            let r = softmax_splat(src_in.view(), &flow, Array2::zeros((8, 8)).view()).unwrap();
            let total: f64 = r.warped.index_axis(Axis(0), 0).iter().zip(r.weight.iter()).map(|(v, w)| v * w).sum();
            let expected = src_in.sum();
            prop_assert!((total - expected).abs() <= 1e-4 * expected.max(1e-9));
        }
    }
}
