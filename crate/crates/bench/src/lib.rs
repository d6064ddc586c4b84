//! Shared fixtures for the benchmarks.

use evfi_core::estimator::EstimatorConfig;
use evfi_core::pipeline::{Dataset, InterpolationConfig};
use evfi_core::synthetic::{render_sequence, textured_scene, Shape, Trajectory};
use evfi_core::{FlowField, SimulatorConfig};
use ndarray::{Array2, Array3};

pub const INTERVAL_US: u64 = 10_000;

/// Two frames of a textured disc on a parabolic path, with events.
pub fn parabola_pair(size: usize, seed: u64) -> Dataset {
    let c = size as f64 / 2.0;
    let len = size as f64 / 8.0;
    let scene = textured_scene(
        size,
        seed,
        Shape::Disc { radius: size as f64 / 5.0 },
        Trajectory::Parabola { start: (c - len / 2.0, c + 4.0), end: (c + len / 2.0, c + 4.0), apex: len / 2.0 },
    );
    let seq = render_sequence(&scene, 2, INTERVAL_US, 16, &SimulatorConfig::default()).expect("valid scene");
    Dataset::new(seq.frames, seq.events).expect("consistent sequence")
}

/// Estimator settings trimmed so a criterion sample stays short.
pub fn quick_config() -> InterpolationConfig {
    InterpolationConfig {
        estimator: EstimatorConfig { levels: 3, iterations: 30, ..EstimatorConfig::default() },
        ..InterpolationConfig::default()
    }
}

/// Smooth swirl flow with a collision-heavy centre, plus a ramp priority.
pub fn swirl(h: usize, w: usize) -> (FlowField, Array2<f64>) {
    let (cx, cy) = (w as f64 / 2.0, h as f64 / 2.0);
    let u = Array2::from_shape_fn((h, w), |(y, _)| -0.08 * (y as f64 - cy) + 0.5);
    let v = Array2::from_shape_fn((h, w), |(_, x)| 0.08 * (x as f64 - cx) - 0.25);
    let p = Array2::from_shape_fn((h, w), |(y, x)| -((x + y) as f64) / (h + w) as f64);
    (FlowField::from_components(u, v).expect("finite"), p)
}

pub fn ramp_image(c: usize, h: usize, w: usize) -> Array3<f64> {
    Array3::from_shape_fn((c, h, w), |(ch, y, x)| ((x * 7 + y * 13 + ch * 5) % 97) as f64 / 96.0)
}
