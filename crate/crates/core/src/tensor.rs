//! Dense plane and tensor helpers shared by the warping, fusion and flow code.
//!
//! Planes are `H×W` and tensors `C×H×W`, both row-major `f64`. Border
//! handling is replicate (clamp) everywhere in this module.

use ndarray::{s, Array1, Array2, Array3, Array4, ArrayView2, ArrayView3, Axis};
use rayon::prelude::*;

pub type Plane = Array2<f64>;
pub type Tensor = Array3<f64>;

/// Bilinear sample with coordinates clamped to the plane.
#[inline]
pub fn sample_bilinear_clamped(plane: ArrayView2<'_, f64>, x: f64, y: f64) -> f64 {
    let (h, w) = plane.dim();
    let x = x.clamp(0.0, (w - 1) as f64);
    let y = y.clamp(0.0, (h - 1) as f64);
    let x0 = x.floor() as usize;
    let y0 = y.floor() as usize;
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let ax = x - x0 as f64;
    let ay = y - y0 as f64;
    let top = plane[[y0, x0]] * (1.0 - ax) + plane[[y0, x1]] * ax;
    let bottom = plane[[y1, x0]] * (1.0 - ax) + plane[[y1, x1]] * ax;
    top * (1.0 - ay) + bottom * ay
}

/// Bilinear resize using pixel-center alignment.
pub fn resize_bilinear(plane: ArrayView2<'_, f64>, out_h: usize, out_w: usize) -> Plane {
    let (h, w) = plane.dim();
    if (h, w) == (out_h, out_w) {
        return plane.to_owned();
    }
    let sy = h as f64 / out_h as f64;
    let sx = w as f64 / out_w as f64;
    Array2::from_shape_fn((out_h, out_w), |(y, x)| {
        let src_y = (y as f64 + 0.5) * sy - 0.5;
        let src_x = (x as f64 + 0.5) * sx - 0.5;
        sample_bilinear_clamped(plane, src_x, src_y)
    })
}

/// Size of a plane after one 2× reduction.
#[inline]
pub fn half_size(n: usize) -> usize {
    n.div_ceil(2)
}

/// 2× area (box) downsampling. Output size is `⌈h/2⌉×⌈w/2⌉`; edge cells
/// of odd-sized inputs average only the pixels they cover.
pub fn downsample_area(plane: ArrayView2<'_, f64>) -> Plane {
    let (h, w) = plane.dim();
    let (oh, ow) = (half_size(h), half_size(w));
    Array2::from_shape_fn((oh, ow), |(y, x)| {
        let (y0, x0) = (2 * y, 2 * x);
        let y1 = (y0 + 2).min(h);
        let x1 = (x0 + 2).min(w);
        let block = plane.slice(s![y0..y1, x0..x1]);
        block.sum() / block.len() as f64
    })
}

/// Separable 3-tap binomial blur `[1 2 1]/4`.
pub fn blur_binomial(plane: ArrayView2<'_, f64>) -> Plane {
    let (h, w) = plane.dim();
    let horiz = Array2::from_shape_fn((h, w), |(y, x)| {
        let l = plane[[y, x.saturating_sub(1)]];
        let r = plane[[y, (x + 1).min(w - 1)]];
        0.25 * l + 0.5 * plane[[y, x]] + 0.25 * r
    });
    Array2::from_shape_fn((h, w), |(y, x)| {
        let u = horiz[[y.saturating_sub(1), x]];
        let d = horiz[[(y + 1).min(h - 1), x]];
        0.25 * u + 0.5 * horiz[[y, x]] + 0.25 * d
    })
}

/// Central-difference gradients `(∂/∂x, ∂/∂y)`.
pub fn gradients(plane: ArrayView2<'_, f64>) -> (Plane, Plane) {
    let (h, w) = plane.dim();
    let gx = Array2::from_shape_fn((h, w), |(y, x)| {
        0.5 * (plane[[y, (x + 1).min(w - 1)]] - plane[[y, x.saturating_sub(1)]])
    });
    let gy = Array2::from_shape_fn((h, w), |(y, x)| {
        0.5 * (plane[[(y + 1).min(h - 1), x]] - plane[[y.saturating_sub(1), x]])
    });
    (gx, gy)
}

/// Parameters of one 3×3 convolution layer: weight `out×in×3×3`, bias `out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv3x3 {
    pub weight: Array4<f64>,
    pub bias: Array1<f64>,
}

impl Conv3x3 {
    pub fn zeros(in_channels: usize, out_channels: usize) -> Self {
        Self {
            weight: Array4::zeros((out_channels, in_channels, 3, 3)),
            bias: Array1::zeros(out_channels),
        }
    }

    pub fn in_channels(&self) -> usize {
        self.weight.dim().1
    }

    pub fn out_channels(&self) -> usize {
        self.weight.dim().0
    }

    /// Applies the convolution with replicate padding. Output channels are
    /// computed independently (in parallel); each one accumulates in a fixed
    /// order, so results do not depend on the thread count.
    pub fn apply(&self, input: ArrayView3<'_, f64>) -> Tensor {
        let (cin, h, w) = input.dim();
        assert_eq!(cin, self.in_channels(), "conv input channel mismatch");
        let padded = pad_replicate(input);
        let planes: Vec<Plane> = (0..self.out_channels())
            .into_par_iter()
            .map(|o| {
                let mut out = Array2::from_elem((h, w), self.bias[o]);
                for i in 0..cin {
                    let src = padded.index_axis(Axis(0), i);
                    for ky in 0..3 {
                        for kx in 0..3 {
                            let k = self.weight[[o, i, ky, kx]];
                            if k == 0.0 {
                                continue;
                            }
                            let window = src.slice(s![ky..ky + h, kx..kx + w]);
                            out.scaled_add(k, &window);
                        }
                    }
                }
                out
            })
            .collect();
        stack_planes(&planes, h, w)
    }
}

fn pad_replicate(input: ArrayView3<'_, f64>) -> Tensor {
    let (c, h, w) = input.dim();
    Array3::from_shape_fn((c, h + 2, w + 2), |(ch, y, x)| {
        let sy = y.saturating_sub(1).min(h - 1);
        let sx = x.saturating_sub(1).min(w - 1);
        input[[ch, sy, sx]]
    })
}

pub fn stack_planes(planes: &[Plane], h: usize, w: usize) -> Tensor {
    let mut out = Array3::zeros((planes.len(), h, w));
    for (c, p) in planes.iter().enumerate() {
        out.index_axis_mut(Axis(0), c).assign(p);
    }
    out
}

/// Concatenates tensors along the channel axis.
pub fn concat_channels(parts: &[&Tensor]) -> Tensor {
    let views: Vec<_> = parts.iter().map(|t| t.view()).collect();
    ndarray::concatenate(Axis(0), &views).expect("spatial sizes must agree")
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn all_finite<'a>(values: impl IntoIterator<Item = &'a f64>) -> bool {
    values.into_iter().all(|v| v.is_finite())
}
