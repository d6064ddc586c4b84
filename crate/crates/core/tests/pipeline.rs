mod common;

use common::*;
use evfi_core::events::keyframe_average;
use evfi_core::fusion::{FusionConfig, ParamSource};
use evfi_core::pipeline::{
    align_streams, evaluate_skip, interpolate, interpolate_pair, psnr, ssim, Dataset, FusionMode, InterpolationConfig, Method,
};
use evfi_core::synthetic::{render_sequence, textured_scene, Shape, Trajectory};
use evfi_core::SimulatorConfig;

fn sequence(frames: usize, seed: u64) -> Dataset {
    let scene = textured_scene(
        64,
        seed,
        Shape::Disc { radius: 14.0 },
        Trajectory::Parabola { start: (20.0, 36.0), end: (44.0, 36.0), apex: 8.0 },
    );
    let seq = render_sequence(&scene, frames, INTERVAL_US, 24, &SimulatorConfig::with_threshold(0.1)).unwrap();
    Dataset::new(seq.frames, seq.events).unwrap()
}

#[test]
fn one_skip_beats_keyframe_average() {
    let ds = sequence(3, 1);
    let r = evaluate_skip(&ds, 1, &InterpolationConfig::default()).unwrap();
    assert_eq!(r.frames.len(), 1);
    let f = &r.frames[0];
    assert_eq!((f.index, f.t_us), (1, INTERVAL_US));
    assert!(f.psnr > f.baseline_psnr, "{} vs {}", f.psnr, f.baseline_psnr);
    assert!(f.ssim > f.baseline_ssim);
}

#[test]
fn early_latent_frames_stay_close_to_the_first_key() {
    let ds = sequence(2, 2);
    let out = interpolate(&ds, 0, 15, &InterpolationConfig::default()).unwrap();
    assert_eq!(out.frames.len(), 17);
    assert_eq!(out.inserted.iter().filter(|i| **i).count(), 15);
    let i0 = &ds.frames[0];
    let first = psnr(&out.frames[1], i0).unwrap();
    let mid = psnr(&out.frames[8], i0).unwrap();
    assert!(first > mid, "first {first} vs mid {mid}");
}

#[test]
fn spline_beats_linear_on_a_parabola() {
    let scene = disc_parabola(4, 12.0, 6.0);
    let (i0, i1, ev) = pair(&scene);
    let truth = scene.render(0.5, INTERVAL_US / 2);
    let score = |method| {
        let cfg = InterpolationConfig { method, ..InterpolationConfig::default() };
        psnr(&interpolate_pair(&i0, &i1, &ev, &[0.5], &cfg, None).unwrap()[0], &truth).unwrap()
    };
    let (spline, linear) = (score(Method::Spline), score(Method::Linear));
    assert!(spline > linear, "spline {spline} vs linear {linear}");
}

#[test]
fn output_is_deterministic_across_thread_counts() {
    let ds = sequence(5, 3);
    let cfg = InterpolationConfig::default();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| {
            let r = evaluate_skip(&ds, 1, &cfg).unwrap();
            (r.interpolated, r.frames.iter().map(|f| (f.psnr, f.ssim)).collect::<Vec<_>>())
        })
    };
    let (a, b) = (run(1), run(4));
    assert_eq!(a, b);
}

#[test]
fn gated_fusion_runs_end_to_end() {
    let ds = sequence(3, 4);
    let cfg = InterpolationConfig {
        fusion: FusionMode::Gated,
        fusion_cfg: FusionConfig { depth: 2, base_channels: 8, max_channels: 16, params: ParamSource::Seed(5) },
        ..InterpolationConfig::default()
    };
    let r = evaluate_skip(&ds, 1, &cfg).unwrap();
    let f = &r.interpolated[0];
    assert_eq!(f.dims(), ds.frames[0].dims());
    assert!(f.data().iter().all(|v| (0.0..=1.0).contains(v)));
    assert!(r.frames[0].psnr.is_finite());
}

#[test]
fn aligned_dataset_realigns_to_zero() {
    let ds = sequence(2, 5);
    let shifted = Dataset::new(ds.frames.clone(), ds.events.shifted(-2, 3)).unwrap();
    let s = align_streams(&shifted.events, &ds.frames[0], &ds.frames[1], 4).unwrap();
    assert_eq!(s, (-2, 3));
    let fixed = shifted.with_alignment(s);
    assert_eq!(align_streams(&fixed.aligned_events(), &ds.frames[0], &ds.frames[1], 4).unwrap(), (0, 0));
}

#[test]
fn metric_sanity_on_fixture_frames() {
    let ds = sequence(3, 6);
    for f in &ds.frames {
        assert_eq!(psnr(f, f).unwrap(), f64::INFINITY);
        assert!((ssim(f, f).unwrap() - 1.0).abs() < 1e-12);
    }
    let avg = keyframe_average(&ds.frames[0], &ds.frames[2], ds.frames[1].t()).unwrap();
    assert!(psnr(&avg, &ds.frames[1]).unwrap().is_finite());
}

#[test]
fn too_few_frames_for_skip() {
    let ds = sequence(2, 7);
    assert!(interpolate(&ds, 1, 1, &InterpolationConfig::default()).is_err());
    assert!(evaluate_skip(&ds, 1, &InterpolationConfig::default()).is_err());
    assert!(evaluate_skip(&ds, 0, &InterpolationConfig::default()).is_err());
}
