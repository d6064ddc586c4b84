//! Least-squares fitting of spline control points to sampled flows.
//!
//! The interpolation weights at each sample time are shared by every pixel,
//! so the normal matrix is assembled and factored once; each pixel then
//! costs one triangular solve per channel. With the Keys kernel each row of
//! the design matrix touches at most four (plus folded ghost) control
//! points, so the normal matrix is banded; `K` is small and a dense Cholesky
//! factorization of it is used.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use ndarray::{s, Array4};
use rayon::prelude::*;

use super::field::{check_time, FlowSample, SplineField, CH_DX, CH_DY, CH_PRIORITY};
use super::kernel::control_weights;
use crate::error::{Error, Result};

/// Tikhonov damping added to the normal equations.
pub const DEFAULT_DAMPING: f64 = 1e-6;

/// A normal-matrix pivot at or below `DEGENERACY_RATIO · λ` means the
/// corresponding direction is supported by damping alone.
const DEGENERACY_RATIO: f64 = 100.0;

/// Fits a `K`-point spline field to flow samples. Displacement control
/// points at `t = 0` are held at zero; priority is unconstrained.
pub fn fit_spline(samples: &[FlowSample], k: usize) -> Result<SplineField> {
    fit_spline_damped(samples, k, DEFAULT_DAMPING)
}

pub fn fit_spline_damped(samples: &[FlowSample], k: usize, damping: f64) -> Result<SplineField> {
    if k < 2 {
        return Err(Error::invalid("spline needs at least 2 control points"));
    }
    if samples.len() < k {
        return Err(Error::invalid(format!(
            "fitting {k} control points needs at least {k} samples, got {}",
            samples.len()
        )));
    }
    let (h, w) = samples[0].flow.dims();
    for (i, smp) in samples.iter().enumerate() {
        check_time(smp.t)?;
        if smp.flow.dims() != (h, w) || smp.priority.dim() != (h, w) {
            return Err(Error::shape(format!("sample {i} geometry differs from sample 0")));
        }
        if !smp.flow.is_finite() || smp.priority.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("sample {i} is not finite")));
        }
    }

    let design = DMatrix::from_fn(samples.len(), k, |m, j| control_weights(samples[m].t, k)[j]);
    // displacement: column 0 is pinned to zero
    let disp = NormalSystem::new(design.columns(1, k - 1).into_owned(), damping)?;
    let prio = NormalSystem::new(design, damping)?;

    let mut control = Array4::<f64>::zeros((k, 3, h, w));
    let rows: Vec<Array4<f64>> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut row = Array4::<f64>::zeros((k, 3, 1, w));
            for x in 0..w {
                let dx = disp.solve(samples.iter().map(|s| s.flow.u()[[y, x]]));
                let dy = disp.solve(samples.iter().map(|s| s.flow.v()[[y, x]]));
                let pr = prio.solve(samples.iter().map(|s| s.priority[[y, x]]));
                for j in 1..k {
                    row[[j, CH_DX, 0, x]] = dx[j - 1];
                    row[[j, CH_DY, 0, x]] = dy[j - 1];
                }
                for j in 0..k {
                    row[[j, CH_PRIORITY, 0, x]] = pr[j];
                }
            }
            row
        })
        .collect();
    for (y, row) in rows.into_iter().enumerate() {
        control.slice_mut(s![.., .., y..y + 1, ..]).assign(&row);
    }
    SplineField::new(control)
}

/// Root-mean-square residual of a fitted field against its samples, per
/// pixel and channel, averaged over the two displacement channels.
pub fn fit_residual_rms(field: &SplineField, samples: &[FlowSample]) -> Result<ndarray::Array2<f64>> {
    let (h, w) = field.dims();
    let mut acc = ndarray::Array2::<f64>::zeros((h, w));
    for smp in samples {
        let fitted = field.sample(smp.t)?;
        let du = &fitted.flow.u() - &smp.flow.u();
        let dv = &fitted.flow.v() - &smp.flow.v();
        acc = acc + du.mapv(|v| v * v) + dv.mapv(|v| v * v);
    }
    Ok(acc.mapv(|v| (v / (2 * samples.len()) as f64).sqrt()))
}

/// Refinement steps against the undamped normal equations. Surviving
/// pivots exceed `DEGENERACY_RATIO · λ`, so each step shrinks the damping
/// bias by at least that ratio.
const REFINEMENT_STEPS: usize = 2;

struct NormalSystem {
    design: DMatrix<f64>,
    normal: DMatrix<f64>,
    factor: Cholesky<f64, Dyn>,
}

impl NormalSystem {
    fn new(design: DMatrix<f64>, damping: f64) -> Result<Self> {
        let n = design.ncols();
        let normal = design.transpose() * &design;
        let factor = Cholesky::new(&normal + DMatrix::identity(n, n) * damping)
            .ok_or_else(|| Error::Numerical("spline normal equations are not positive definite".into()))?;
        let l = factor.l_dirty();
        let threshold = DEGENERACY_RATIO * damping;
        for i in 0..n {
            if l[(i, i)] * l[(i, i)] <= threshold {
                return Err(Error::Numerical(format!(
                    "spline fit is rank deficient: control point direction {i} is unconstrained by the sample times"
                )));
            }
        }
        Ok(Self { design, normal, factor })
    }

    fn solve(&self, values: impl Iterator<Item = f64>) -> DVector<f64> {
        let b = DVector::from_iterator(self.design.nrows(), values);
        let rhs = self.design.transpose() * b;
        let mut x = self.factor.solve(&rhs);
        for _ in 0..REFINEMENT_STEPS {
            let r = &rhs - &self.normal * &x;
            x += self.factor.solve(&r);
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spline::FlowField;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn random_field(k: usize, h: usize, w: usize, seed: u64) -> SplineField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut c = Array4::from_shape_fn((k, 3, h, w), |_| rng.random_range(-5.0..5.0));
        c.slice_mut(s![0, 0..2, .., ..]).fill(0.0);
        SplineField::new(c).unwrap()
    }

    fn samples_of(field: &SplineField, m: usize) -> Vec<FlowSample> {
        (0..m).map(|i| field.sample(i as f64 / (m - 1) as f64).unwrap()).collect()
    }

    #[test]
    fn round_trip_recovers_control_points() {
        for k in [2, 4, 7] {
            let field = random_field(k, 6, 5, k as u64);
            let fitted = fit_spline(&samples_of(&field, 2 * k), k).unwrap();
            let err = (fitted.control() - field.control()).iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(err < 1e-5, "k={k} err={err}");
        }
    }

    #[test]
    fn linear_samples_give_collinear_points() {
        let k = 5;
        let samples: Vec<FlowSample> = (1..=9)
            .map(|i| {
                let t = i as f64 / 9.0;
                FlowSample {
                    t,
                    flow: FlowField::constant(2, 2, 6.0 * t, -3.0 * t),
                    priority: Array2::zeros((2, 2)),
                }
            })
            .collect();
        let fitted = fit_spline(&samples, k).unwrap();
        for j in 0..k {
            let tau = j as f64 / (k - 1) as f64;
            let e = (fitted.control()[[j, 0, 1, 1]] - 6.0 * tau).abs();
            assert!(e < 1e-6, "control {j}: error {e:e}");
            assert!((fitted.control()[[j, 1, 0, 1]] + 3.0 * tau).abs() < 1e-6);
        }
    }

    #[test]
    fn noisy_residual_is_bounded_by_noise() {
        let (k, m, sigma) = (4, 16, 0.3);
        let field = random_field(k, 25, 40, 9);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let noise = Normal::new(0.0, sigma).unwrap();
        let samples: Vec<FlowSample> = samples_of(&field, m)
            .into_iter()
            .map(|mut s| {
                s.flow = FlowField::new(s.flow.data().mapv(|v| v + noise.sample(&mut rng))).unwrap();
                s
            })
            .collect();
        let fitted = fit_spline(&samples, k).unwrap();
        let rms = fit_residual_rms(&fitted, &samples).unwrap();
        let overall = (rms.mapv(|v| v * v).mean().unwrap()).sqrt();
        assert!(overall <= 1.1 * sigma, "rms {overall}");
    }

    #[test]
    fn too_few_samples() {
        let field = random_field(4, 2, 2, 1);
        assert!(fit_spline(&samples_of(&field, 3), 4).is_err());
    }

    #[test]
    fn clustered_sample_times_are_reported_degenerate() {
        let field = random_field(8, 2, 2, 1);
        let samples: Vec<FlowSample> = (0..10).map(|i| field.sample(0.01 * i as f64).unwrap()).collect();
        let err = fit_spline(&samples, 8).unwrap_err();
        assert!(matches!(err, Error::Numerical(_)), "{err}");
    }

    #[test]
    fn mismatched_geometry() {
        let mut samples = samples_of(&random_field(3, 2, 2, 1), 4);
        samples[2].priority = Array2::zeros((3, 2));
        assert!(fit_spline(&samples, 3).is_err());
    }
}
