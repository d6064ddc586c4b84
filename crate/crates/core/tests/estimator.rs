mod common;

use common::*;
use evfi_core::estimator::{estimate_priority, estimate_spline_motion, nonparametric_motion, EstimatorConfig, MotionMode};
use evfi_core::spline::CH_PRIORITY;
use evfi_core::synthetic::Texture;
use evfi_core::warp::softmax_splat;
use evfi_core::{EventStream, FlowField};
use ndarray::{Array2, Array3, Axis};

#[test]
fn static_scene_gives_zero_motion() {
    let scene = square_linear(1, (0.0, 0.0));
    let f = scene.render(0.0, 0);
    let g = f.clone().with_time(INTERVAL_US);
    let s = estimate_spline_motion(&f, &g, &EventStream::empty(SIZE as u32, SIZE as u32), 4, &EstimatorConfig::default()).unwrap();
    for k in 0..4 {
        for c in 0..2 {
            assert!(s.plane(k, c).iter().all(|v| *v == 0.0));
        }
    }
}

#[test]
fn translating_square_both_mode() {
    let scene = square_linear(2, (10.0, 4.0));
    let (i0, i1, ev) = pair(&scene);
    let s = estimate_spline_motion(&i0, &i1, &ev, 4, &EstimatorConfig::default()).unwrap();
    let e1 = object_flow_error(&scene, &s.sample(1.0).unwrap().flow, 1.0, 4.0);
    let e5 = object_flow_error(&scene, &s.sample(0.5).unwrap().flow, 0.5, 4.0);
    assert!(e1 < 0.5, "endpoint error {e1}");
    assert!(e5 < 0.5, "mid-time error {e5}");
}

#[test]
fn events_improve_curved_motion() {
    let scene = disc_parabola(3, 10.0, 5.0);
    let (i0, i1, ev) = pair(&scene);
    let err = |mode| {
        let cfg = EstimatorConfig { mode, ..Default::default() };
        let s = estimate_spline_motion(&i0, &i1, &ev, 4, &cfg).unwrap();
        object_flow_error(&scene, &s.sample(0.5).unwrap().flow, 0.5, 4.0)
    };
    let (both, images) = (err(MotionMode::Both), err(MotionMode::Images));
    assert!(both < images, "both {both} vs images {images}");
}

#[test]
fn images_mode_is_linear() {
    let scene = disc_parabola(4, 8.0, 4.0);
    let (i0, i1, ev) = pair(&scene);
    let cfg = EstimatorConfig { mode: MotionMode::Images, ..Default::default() };
    let s = estimate_spline_motion(&i0, &i1, &ev, 4, &cfg).unwrap();
    for c in 0..2 {
        let end = s.plane(3, c).to_owned();
        for k in 0..4 {
            let expect = &end * (k as f64 / 3.0);
            let diff = (&s.plane(k, c) - &expect).mapv(f64::abs).fold(0.0f64, |m, v| m.max(*v));
            assert!(diff < 1e-9, "control {k} channel {c}: {diff}");
        }
    }
}

#[test]
fn estimation_is_deterministic() {
    let scene = disc_parabola(5, 8.0, 4.0);
    let (i0, i1, ev) = pair(&scene);
    let cfg = EstimatorConfig::default();
    let a = estimate_spline_motion(&i0, &i1, &ev, 4, &cfg).unwrap();
    let b = estimate_spline_motion(&i0, &i1, &ev, 4, &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn events_mode_needs_events() {
    let scene = square_linear(6, (4.0, 0.0));
    let f = scene.render(0.0, 0);
    let g = scene.render(1.0, INTERVAL_US);
    let cfg = EstimatorConfig { mode: MotionMode::Events, ..Default::default() };
    assert!(estimate_spline_motion(&f, &g, &EventStream::empty(SIZE as u32, SIZE as u32), 4, &cfg).is_err());
    let tight = EstimatorConfig { samples: 3, ..Default::default() };
    assert!(estimate_spline_motion(&f, &g, &EventStream::empty(SIZE as u32, SIZE as u32), 4, &tight).is_err());
}

#[test]
fn nonparametric_agrees_with_spline_on_linear_motion() {
    let scene = square_linear(7, (8.0, -4.0));
    let (i0, i1, ev) = pair(&scene);
    let cfg = EstimatorConfig::default();
    let s = estimate_spline_motion(&i0, &i1, &ev, 4, &cfg).unwrap();
    let np = nonparametric_motion(&i0, &i1, &ev, 0.5, &cfg).unwrap();
    let sp = s.sample(0.5).unwrap().flow;
    let (mut sum, mut n) = (0.0, 0.0);
    for y in 0..SIZE {
        for x in 0..SIZE {
            if scene.interior(x, y, 0.0, 4.0) {
                sum += ((np.u()[[y, x]] - sp.u()[[y, x]]).powi(2) + (np.v()[[y, x]] - sp.v()[[y, x]]).powi(2)).sqrt();
                n += 1.0;
            }
        }
    }
    assert!(sum / n < 0.5, "mean disagreement {}", sum / n);

    let zero = nonparametric_motion(&i0, &i1, &ev, 0.0, &cfg).unwrap();
    assert!(zero.data().iter().all(|v| v.abs() <= 0.05));
}

/// Two layers, a bright textured square over a dark textured background,
/// with ground-truth flow and reference frame so only the priority rule is
/// under test. An object indicator is forward-splatted; at every target the
/// object covers at t that receives weight from both layers, the occluder
/// should carry the larger softmax share.
#[test]
fn occluder_wins_collisions() {
    let mut scene = square_linear(3, (12.0, 0.0));
    scene.background = Texture::two_band(3, 0.25, 0.3);
    scene.object = Texture::two_band(1003, 0.7, 0.3);
    let (h, w) = (SIZE, SIZE);
    let t = 0.5;
    let (dx, dy) = scene.displacement(0.0, t);
    let obj = Array2::from_shape_fn((h, w), |(y, x)| scene.covers(x, y, 0.0));
    let flow = FlowField::from_components(
        obj.mapv(|o| if o { dx } else { 0.0 }),
        obj.mapv(|o| if o { dy } else { 0.0 }),
    )
    .unwrap();
    let i0 = scene.render(0.0, 0);
    let reference = scene.render(t, INTERVAL_US / 2);
    let priority = estimate_priority(&i0, &[reference], &[flow.clone()], EstimatorConfig::default().priority_beta).unwrap();
    let src = Array3::from_shape_fn((2, h, w), |(c, y, x)| {
        let o = if obj[[y, x]] { 1.0 } else { 0.0 };
        if c == 0 { o } else { 1.0 - o }
    });
    let r = softmax_splat(src.view(), &flow, priority.index_axis(Axis(0), 0)).unwrap();
    let (mut sites, mut won) = (0, 0);
    for y in 0..h {
        for x in 0..w {
            if r.holes[[y, x]] || !scene.covers(x, y, t) {
                continue;
            }
            let share = r.warped[[0, y, x]];
            let (o, b) = (share * r.weight[[y, x]], (1.0 - share) * r.weight[[y, x]]);
            if o > 0.0 && b > 0.0 {
                sites += 1;
                if share > 0.5 {
                    won += 1;
                }
            }
        }
    }
    assert!(sites > 100, "only {sites} collision sites");
    assert!(won as f64 >= 0.9 * sites as f64, "occluder won {won}/{sites}");
}

#[test]
fn priority_channel_is_non_positive() {
    let scene = square_linear(3, (12.0, 0.0));
    let (i0, i1, ev) = pair(&scene);
    let s = estimate_spline_motion(&i0, &i1, &ev, 4, &EstimatorConfig::default()).unwrap();
    assert!(s.control().index_axis(Axis(1), CH_PRIORITY).iter().all(|v| v.is_finite() && *v <= 0.0));
}
