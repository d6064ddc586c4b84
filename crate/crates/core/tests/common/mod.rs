#![allow(dead_code)]

use evfi_core::synthetic::{render_sequence, textured_scene, MovingObjectScene, Shape, Trajectory};
use evfi_core::{EventStream, FlowField, Frame, SimulatorConfig};

pub const SIZE: usize = 96;
pub const INTERVAL_US: u64 = 10_000;

pub fn disc_parabola(seed: u64, length: f64, apex: f64) -> MovingObjectScene {
    let c = SIZE as f64 / 2.0;
    textured_scene(
        SIZE,
        seed,
        Shape::Disc { radius: 20.0 },
        Trajectory::Parabola { start: (c - length / 2.0, c + 6.0), end: (c + length / 2.0, c + 6.0), apex },
    )
}

pub fn square_linear(seed: u64, d: (f64, f64)) -> MovingObjectScene {
    let c = SIZE as f64 / 2.0;
    textured_scene(
        SIZE,
        seed,
        Shape::Square { half: 18.0 },
        Trajectory::Linear { start: (c - d.0 / 2.0, c - d.1 / 2.0), end: (c + d.0 / 2.0, c + d.1 / 2.0) },
    )
}

/// Key frames at 0 and `INTERVAL_US` with densely simulated events.
pub fn pair(scene: &MovingObjectScene) -> (Frame, Frame, EventStream) {
    let seq = render_sequence(scene, 2, INTERVAL_US, 32, &SimulatorConfig::with_threshold(0.1)).unwrap();
    (seq.frames[0].clone(), seq.frames[1].clone(), seq.events)
}

/// Mean endpoint error of `flow` against the true object displacement
/// `0 → s`, over pixels at least `margin` inside the object at time 0.
pub fn object_flow_error(scene: &MovingObjectScene, flow: &FlowField, s: f64, margin: f64) -> f64 {
    let (dx, dy) = scene.displacement(0.0, s);
    let (h, w) = flow.dims();
    let (mut sum, mut n) = (0.0, 0.0);
    for y in 0..h {
        for x in 0..w {
            if scene.interior(x, y, 0.0, margin) {
                sum += ((flow.u()[[y, x]] - dx).powi(2) + (flow.v()[[y, x]] - dy).powi(2)).sqrt();
                n += 1.0;
            }
        }
    }
    assert!(n > 0.0);
    sum / n
}
