use ndarray::{s, Array2, Array3, Array4, ArrayView2, Axis};

use super::kernel::control_weights;
use crate::error::{Error, Result};

/// Dense displacement field, `2×H×W` (x then y), in pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField(Array3<f64>);

impl FlowField {
    pub fn new(data: Array3<f64>) -> Result<Self> {
        if data.dim().0 != 2 {
            return Err(Error::shape(format!("flow needs 2 channels, got {}", data.dim().0)));
        }
        Ok(Self(data))
    }

    pub fn zeros(h: usize, w: usize) -> Self {
        Self(Array3::zeros((2, h, w)))
    }

    pub fn constant(h: usize, w: usize, dx: f64, dy: f64) -> Self {
        let mut f = Self::zeros(h, w);
        f.0.index_axis_mut(Axis(0), 0).fill(dx);
        f.0.index_axis_mut(Axis(0), 1).fill(dy);
        f
    }

    pub fn from_components(u: Array2<f64>, v: Array2<f64>) -> Result<Self> {
        if u.dim() != v.dim() {
            return Err(Error::shape("flow components differ in size"));
        }
        Ok(Self(ndarray::stack(Axis(0), &[u.view(), v.view()]).expect("equal shapes")))
    }

    pub fn dims(&self) -> (usize, usize) {
        let (_, h, w) = self.0.dim();
        (h, w)
    }

    pub fn u(&self) -> ArrayView2<'_, f64> {
        self.0.index_axis(Axis(0), 0)
    }

    pub fn v(&self) -> ArrayView2<'_, f64> {
        self.0.index_axis(Axis(0), 1)
    }

    pub fn data(&self) -> &Array3<f64> {
        &self.0
    }

    pub fn into_data(self) -> Array3<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn scaled(&self, factor: f64) -> FlowField {
        FlowField(&self.0 * factor)
    }
}

/// Flow and priority sampled from a spline field at one normalized time.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSample {
    pub t: f64,
    pub flow: FlowField,
    pub priority: Array2<f64>,
}

/// Channel index of each control-point plane.
pub const CH_DX: usize = 0;
pub const CH_DY: usize = 1;
pub const CH_PRIORITY: usize = 2;

/// Per-pixel cubic motion splines: `K` uniformly timed control points for
/// horizontal displacement, vertical displacement and warping priority,
/// stored as a `K×3×H×W` tensor. Displacements at the first control point
/// are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineField {
    control: Array4<f64>,
}

impl SplineField {
    /// Validates finiteness, `K ≥ 2` and the zero-displacement constraint
    /// at the first control point.
    pub fn new(control: Array4<f64>) -> Result<Self> {
        let (k, ch, h, w) = control.dim();
        if k < 2 {
            return Err(Error::invalid(format!("spline needs at least 2 control points, got {k}")));
        }
        if ch != 3 || h == 0 || w == 0 {
            return Err(Error::shape(format!("control tensor must be Kx3xHxW, got {:?}", control.dim())));
        }
        if control.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite spline control point".into()));
        }
        if control.slice(s![0, 0..2, .., ..]).iter().any(|v| *v != 0.0) {
            return Err(Error::invalid("displacement at the first control point must be zero"));
        }
        Ok(Self { control })
    }

    pub fn zeros(k: usize, h: usize, w: usize) -> Result<Self> {
        Self::new(Array4::zeros((k, 3, h, w)))
    }

    /// Control points on a straight line from zero to `endpoint`, with the
    /// given priority at every control point.
    pub fn linear(endpoint: &FlowField, priority: ArrayView2<'_, f64>, k: usize) -> Result<Self> {
        let (h, w) = endpoint.dims();
        if priority.dim() != (h, w) {
            return Err(Error::shape("priority and flow differ in size"));
        }
        if k < 2 {
            return Err(Error::invalid("spline needs at least 2 control points"));
        }
        let mut control = Array4::zeros((k, 3, h, w));
        for i in 0..k {
            let frac = i as f64 / (k - 1) as f64;
            control.slice_mut(s![i, CH_DX, .., ..]).assign(&(&endpoint.u() * frac));
            control.slice_mut(s![i, CH_DY, .., ..]).assign(&(&endpoint.v() * frac));
            control.slice_mut(s![i, CH_PRIORITY, .., ..]).assign(&priority);
        }
        Self::new(control)
    }

    pub fn control_points(&self) -> usize {
        self.control.dim().0
    }

    pub fn dims(&self) -> (usize, usize) {
        let (_, _, h, w) = self.control.dim();
        (h, w)
    }

    /// The `K×3×H×W` control tensor.
    pub fn control(&self) -> &Array4<f64> {
        &self.control
    }

    pub fn plane(&self, k: usize, channel: usize) -> ArrayView2<'_, f64> {
        self.control.slice(s![k, channel, .., ..])
    }

    /// Replaces the priority planes.
    pub fn with_priority(mut self, priority: &Array3<f64>) -> Result<Self> {
        let (k, _, h, w) = self.control.dim();
        if priority.dim() != (k, h, w) {
            return Err(Error::shape(format!("priority {:?} vs {:?}", priority.dim(), (k, h, w))));
        }
        if priority.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite priority".into()));
        }
        self.control.slice_mut(s![.., CH_PRIORITY, .., ..]).assign(priority);
        Ok(self)
    }

    /// Samples flow and priority at normalized time `t`. The cost is one
    /// weighted sum over the `K` control planes, independent of how the
    /// field was estimated or how many times it was sampled before.
    pub fn sample(&self, t: f64) -> Result<FlowSample> {
        let weights = self.jacobian(t)?;
        let (h, w) = self.dims();
        let mut planes = Array3::<f64>::zeros((3, h, w));
        for (k, wk) in weights.iter().enumerate() {
            if *wk == 0.0 {
                continue;
            }
            for ch in 0..3 {
                planes
                    .index_axis_mut(Axis(0), ch)
                    .scaled_add(*wk, &self.control.slice(s![k, ch, .., ..]));
            }
        }
        let priority = planes.index_axis(Axis(0), CH_PRIORITY).to_owned();
        let flow = FlowField(planes.slice_move(s![0..2, .., ..]));
        Ok(FlowSample { t, flow, priority })
    }

    /// Per-control-point weights `w` with `sample(t) = Σ w_k p_k`; ghost
    /// points are folded in, so `Σ w_k = 1`.
    pub fn jacobian(&self, t: f64) -> Result<Vec<f64>> {
        check_time(t)?;
        Ok(control_weights(t, self.control_points()))
    }
}

pub(crate) fn check_time(t: f64) -> Result<()> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(Error::invalid(format!("normalized time {t} outside [0, 1]")))
    }
}

/// Free functions mirroring the method API.
pub fn sample_spline(field: &SplineField, t: f64) -> Result<FlowSample> {
    field.sample(t)
}

pub fn sample_spline_jacobian(field: &SplineField, t: f64) -> Result<Vec<f64>> {
    field.jacobian(t)
}

/// Constant-velocity motion: `t · F₀₁`.
pub fn linear_flow(endpoint: &FlowField, t: f64) -> Result<FlowField> {
    check_time(t)?;
    Ok(endpoint.scaled(t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// One-pixel field whose three channels follow `f(τ)` at the control
    /// times (displacements shifted so they start at zero).
    fn field_from_fn(k: usize, f: impl Fn(f64) -> f64) -> SplineField {
        let mut c = Array4::zeros((k, 3, 1, 1));
        for i in 0..k {
            let tau = i as f64 / (k - 1) as f64;
            c[[i, 0, 0, 0]] = f(tau) - f(0.0);
            c[[i, 1, 0, 0]] = -2.0 * (f(tau) - f(0.0));
            c[[i, 2, 0, 0]] = f(tau);
        }
        SplineField::new(c).unwrap()
    }

    #[test]
    fn reproduces_linear_functions() {
        for k in [2, 3, 4, 8, 16] {
            let field = field_from_fn(k, |tau| 3.5 * tau);
            for i in 0..=200 {
                let t = i as f64 / 200.0;
                let s = field.sample(t).unwrap();
                assert!((s.flow.u()[[0, 0]] - 3.5 * t).abs() < 1e-6);
                assert!((s.priority[[0, 0]] - 3.5 * t).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn reproduces_quadratics() {
        for k in [3, 4, 8, 16] {
            let field = field_from_fn(k, |tau| tau * tau);
            for i in 0..=500 {
                let t = i as f64 / 500.0;
                let s = field.sample(t).unwrap();
                assert!((s.priority[[0, 0]] - t * t).abs() <= 1e-6, "k={k} t={t}");
            }
        }
    }

    #[test]
    fn interpolates_control_points() {
        let field = field_from_fn(6, |tau| (5.0 * tau).sin());
        for i in 0..6 {
            let t = i as f64 / 5.0;
            let s = field.sample(t).unwrap();
            assert_eq!(s.priority[[0, 0]], field.control()[[i, 2, 0, 0]]);
        }
    }

    #[test]
    fn first_control_point_must_be_zero_displacement() {
        let mut c = Array4::zeros((4, 3, 2, 2));
        c[[0, 1, 1, 0]] = 0.5;
        assert!(SplineField::new(c.clone()).is_err());
        c[[0, 1, 1, 0]] = 0.0;
        c[[0, 2, 1, 0]] = 0.5;
        assert!(SplineField::new(c).is_ok());
        assert!(SplineField::zeros(1, 2, 2).is_err());
    }

    #[test]
    fn rejects_time_outside_unit_interval() {
        let field = SplineField::zeros(4, 2, 2).unwrap();
        assert!(field.sample(-0.01).is_err());
        assert!(field.sample(1.01).is_err());
        assert!(field.jacobian(f64::NAN).is_err());
    }

    #[test]
    fn jacobian_at_zero() {
        let field = SplineField::zeros(5, 1, 1).unwrap();
        assert_eq!(field.jacobian(0.0).unwrap(), vec![1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn linear_flow_scales() {
        let f = FlowField::constant(2, 3, 4.0, -8.0);
        assert_eq!(linear_flow(&f, 0.0).unwrap(), FlowField::zeros(2, 3));
        assert_eq!(linear_flow(&f, 1.0).unwrap(), f);
        assert_eq!(linear_flow(&f, 0.25).unwrap(), FlowField::constant(2, 3, 1.0, -2.0));
        assert!(linear_flow(&f, 2.0).is_err());
    }

    fn arb_field() -> impl Strategy<Value = SplineField> {
        (2usize..12, prop::collection::vec(-20.0f64..20.0, 12 * 3 * 2 * 3)).prop_map(|(k, vals)| {
            let mut c = Array4::from_shape_fn((k, 3, 2, 3), |(i, ch, y, x)| vals[((i * 3 + ch) * 2 + y) * 3 + x]);
            c.slice_mut(s![0, 0..2, .., ..]).fill(0.0);
            SplineField::new(c).unwrap()
        })
    }

    proptest! {
        #[test]
        fn partition_of_unity(k in 2usize..20, t in 0.0f64..=1.0) {
            let field = SplineField::zeros(k, 1, 1).unwrap();
            let sum: f64 = field.jacobian(t).unwrap().iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-9);
        }

        #[test]
        fn zero_flow_at_start(field in arb_field()) {
            let s = field.sample(0.0).unwrap();
            prop_assert!(s.flow.data().iter().all(|v| *v == 0.0));
        }

        #[test]
        fn sample_matches_jacobian(field in arb_field(), t in 0.0f64..=1.0) {
            let w = field.jacobian(t).unwrap();
            let s = field.sample(t).unwrap();
            let direct: f64 = (0..field.control_points()).map(|k| w[k] * field.control()[[k, 0, 1, 2]]).sum();
            prop_assert!((s.flow.u()[[1, 2]] - direct).abs() < 1e-9);
        }

        #[test]
        fn temporal_lipschitz(field in arb_field(), t in 0.0f64..0.9999) {
            let k = field.control_points();
            let delta = 1e-4;
            let max_p = field.control().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let bound = 6.0 * (k - 1) as f64 * max_p * delta;
            let a = field.sample(t).unwrap();
            let b = field.sample(t + delta).unwrap();
            for (x, y) in a.flow.data().iter().zip(b.flow.data().iter()) {
                prop_assert!((x - y).abs() <= bound + 1e-12);
            }
        }
    }
}
