//! Scoring interpolation against withheld frames.

use rayon::prelude::*;

use super::dataset::Dataset;
use super::interpolate::{gate_params, interpolate_pair, keyframe_indices, InterpolationConfig};
use super::metrics::{psnr, ssim};
use crate::error::{Error, Result};
use crate::events::{keyframe_average, Frame};

/// Scores of one withheld frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameScore {
    /// Index of the withheld frame in the dataset.
    pub index: usize,
    pub t_us: u64,
    pub psnr: f64,
    pub ssim: f64,
    /// Scores of the plain key-frame average.
    pub baseline_psnr: f64,
    pub baseline_ssim: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SkipReport {
    pub frames: Vec<FrameScore>,
    pub interpolated: Vec<Frame>,
}

impl SkipReport {
    fn mean(&self, f: impl Fn(&FrameScore) -> f64) -> f64 {
        self.frames.iter().map(f).sum::<f64>() / self.frames.len() as f64
    }

    pub fn mean_psnr(&self) -> f64 {
        self.mean(|s| s.psnr)
    }

    pub fn mean_ssim(&self) -> f64 {
        self.mean(|s| s.ssim)
    }

    pub fn mean_baseline_psnr(&self) -> f64 {
        self.mean(|s| s.baseline_psnr)
    }

    pub fn mean_baseline_ssim(&self) -> f64 {
        self.mean(|s| s.baseline_ssim)
    }
}

/// Withholds `skip` frames between key frames, interpolates each withheld
/// frame at its own timestamp and scores it against the original.
pub fn evaluate_skip(ds: &Dataset, skip: usize, cfg: &InterpolationConfig) -> Result<SkipReport> {
    if skip == 0 {
        return Err(Error::invalid("skip 0 withholds no frames to evaluate"));
    }
    let keys = keyframe_indices(ds.frames.len(), skip);
    if keys.len() < 2 {
        return Err(Error::invalid(format!("{} frames leave fewer than two key frames with skip {skip}", ds.frames.len())));
    }
    let params = gate_params(ds, cfg)?;
    let events = ds.aligned_events();
    let per_gap: Vec<Vec<(FrameScore, Frame)>> = keys
        .par_windows(2)
        .map(|k| {
            let (i0, i1) = (&ds.frames[k[0]], &ds.frames[k[1]]);
            let span = (i1.t() - i0.t()) as f64;
            let withheld: Vec<usize> = (k[0] + 1..k[1]).collect();
            let times: Vec<f64> = withheld.iter().map(|&i| (ds.frames[i].t() - i0.t()) as f64 / span).collect();
            let out = interpolate_pair(i0, i1, &events, &times, cfg, params.as_ref())?;
            withheld
                .iter()
                .zip(out)
                .map(|(&i, frame)| {
                    let gt = &ds.frames[i];
                    let base = keyframe_average(i0, i1, gt.t())?;
                    let score = FrameScore {
                        index: i,
                        t_us: gt.t(),
                        psnr: psnr(&frame, gt)?,
                        ssim: ssim(&frame, gt)?,
                        baseline_psnr: psnr(&base, gt)?,
                        baseline_ssim: ssim(&base, gt)?,
                    };
                    Ok((score, frame))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let (frames, interpolated) = per_gap.into_iter().flatten().unzip();
    Ok(SkipReport { frames, interpolated })
}
