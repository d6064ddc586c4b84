//! Full-frame image quality metrics (no border crop).

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::events::Frame;

/// Peak signal-to-noise ratio for unit dynamic range. Identical frames give
/// `f64::INFINITY`.
pub fn psnr(a: &Frame, b: &Frame) -> Result<f64> {
    a.check_geometry(b, "psnr")?;
    let n = a.data().len() as f64;
    let mse = a.data().iter().zip(b.data().iter()).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / n;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (1.0 / mse).log10())
}

pub const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const K1: f64 = 0.01;
const K2: f64 = 0.03;

/// Mean structural similarity on luma, Gaussian window 11×11 (σ = 1.5),
/// over every window position fully inside the image.
pub fn ssim(a: &Frame, b: &Frame) -> Result<f64> {
    a.check_geometry(b, "ssim")?;
    let (h, w) = a.dims();
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::invalid(format!("{w}x{h} image is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window")));
    }
    let (la, lb) = (a.luma(), b.luma());
    let g = gaussian_window();
    let mu_a = filter_valid(la.view(), &g);
    let mu_b = filter_valid(lb.view(), &g);
    let aa = filter_valid((&la * &la).view(), &g);
    let bb = filter_valid((&lb * &lb).view(), &g);
    let ab = filter_valid((&la * &lb).view(), &g);
    let (c1, c2) = (K1 * K1, K2 * K2);
    let mut total = 0.0;
    for i in 0..mu_a.len() {
        let (ma, mb) = (mu_a.as_slice().unwrap()[i], mu_b.as_slice().unwrap()[i]);
        let va = aa.as_slice().unwrap()[i] - ma * ma;
        let vb = bb.as_slice().unwrap()[i] - mb * mb;
        let cov = ab.as_slice().unwrap()[i] - ma * mb;
        total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
    Ok(total / mu_a.len() as f64)
}

fn gaussian_window() -> Vec<f64> {
    let r = (SSIM_WINDOW / 2) as f64;
    let g: Vec<f64> = (0..SSIM_WINDOW).map(|i| (-(i as f64 - r).powi(2) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp()).collect();
    let s: f64 = g.iter().sum();
    g.into_iter().map(|v| v / s).collect()
}

/// Separable correlation with `g`, valid region only.
fn filter_valid(p: ArrayView2<'_, f64>, g: &[f64]) -> Array2<f64> {
    let (h, w) = p.dim();
    let n = g.len();
    let rows = Array2::from_shape_fn((h, w - n + 1), |(y, x)| (0..n).map(|i| g[i] * p[[y, x + i]]).sum::<f64>());
    Array2::from_shape_fn((h - n + 1, w - n + 1), |(y, x)| (0..n).map(|i| g[i] * rows[[y + i, x]]).sum::<f64>())
}
