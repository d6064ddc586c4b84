//! Analytic synthetic scenes with known motion.
//!
//! Textures are sums of sinusoids, so a scene can be rendered exactly at any
//! sub-pixel position and time. Used by the test suites, the benchmark
//! harness and the `simulate` command.

use ndarray::Array3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::events::{simulate_events, EventStream, Frame, SimulatorConfig};

/// Smooth random texture: mean plus a sum of plane waves.
#[derive(Debug, Clone, PartialEq)]
pub struct Texture {
    mean: f64,
    /// `(kx, ky, phase, amplitude)`
    waves: Vec<(f64, f64, f64, f64)>,
}

impl Texture {
    /// `count` waves with wavelengths in `[min_wavelength, max_wavelength]`
    /// pixels; the peak deviation from `mean` is at most `contrast`.
    pub fn random(seed: u64, mean: f64, contrast: f64, count: usize, min_wavelength: f64, max_wavelength: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let amp = contrast / count.max(1) as f64;
        let waves = (0..count)
            .map(|_| {
                let lambda = rng.random_range(min_wavelength..=max_wavelength);
                let theta = rng.random_range(0.0..std::f64::consts::PI);
                let k = 2.0 * std::f64::consts::PI / lambda;
                (k * theta.cos(), k * theta.sin(), rng.random_range(0.0..std::f64::consts::TAU), amp)
            })
            .collect();
        Self { mean, waves }
    }

    /// Sum of two textures (means add).
    pub fn plus(mut self, other: Texture) -> Self {
        self.mean += other.mean;
        self.waves.extend(other.waves);
        self
    }

    /// Coarse band of wavelengths 12–48 px plus a fine 4–10 px band: enough
    /// large-scale structure for coarse pyramid levels and fine detail for
    /// sub-pixel accuracy.
    pub fn two_band(seed: u64, mean: f64, contrast: f64) -> Self {
        Texture::random(seed, mean, 0.6 * contrast, 6, 12.0, 48.0)
            .plus(Texture::random(seed ^ 0x9e37, 0.0, 0.4 * contrast, 6, 4.0, 10.0))
    }

    pub fn flat(value: f64) -> Self {
        Self { mean: value, waves: Vec::new() }
    }

    pub fn at(&self, x: f64, y: f64) -> f64 {
        self.mean + self.waves.iter().map(|(kx, ky, ph, a)| a * (kx * x + ky * y + ph).sin()).sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Disc { radius: f64 },
    Square { half: f64 },
}

impl Shape {
    /// Distance of `(dx, dy)` (relative to the center) inside the boundary;
    /// negative outside.
    fn depth(&self, dx: f64, dy: f64) -> f64 {
        match *self {
            Shape::Disc { radius } => radius - (dx * dx + dy * dy).sqrt(),
            Shape::Square { half } => half - dx.abs().max(dy.abs()),
        }
    }

    /// Anti-aliased coverage of the point `(dx, dy)` relative to the center.
    fn coverage(&self, dx: f64, dy: f64) -> f64 {
        (self.depth(dx, dy) + 0.5).clamp(0.0, 1.0)
    }
}

/// Object center as a function of normalized sequence time `s ∈ [0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Trajectory {
    Linear { start: (f64, f64), end: (f64, f64) },
    /// Straight line plus an upward arc: the center rises `apex` pixels
    /// above the chord at `s = 0.5` (a thrown ball).
    Parabola { start: (f64, f64), end: (f64, f64), apex: f64 },
}

impl Trajectory {
    pub fn position(&self, s: f64) -> (f64, f64) {
        match *self {
            Trajectory::Linear { start, end } => lerp(start, end, s),
            Trajectory::Parabola { start, end, apex } => {
                let (x, y) = lerp(start, end, s);
                (x, y - 4.0 * apex * s * (1.0 - s))
            }
        }
    }
}

fn lerp(a: (f64, f64), b: (f64, f64), s: f64) -> (f64, f64) {
    (a.0 + (b.0 - a.0) * s, a.1 + (b.1 - a.1) * s)
}

/// A textured object moving over a static textured background.
#[derive(Debug, Clone, PartialEq)]
pub struct MovingObjectScene {
    pub width: usize,
    pub height: usize,
    pub background: Texture,
    pub object: Texture,
    pub shape: Shape,
    pub trajectory: Trajectory,
}

impl MovingObjectScene {
    /// Grayscale rendering at normalized time `s`, stamped `t_us`.
    pub fn render(&self, s: f64, t_us: u64) -> Frame {
        let (cx, cy) = self.trajectory.position(s);
        let data = Array3::from_shape_fn((1, self.height, self.width), |(_, y, x)| {
            let (x, y) = (x as f64, y as f64);
            let alpha = self.shape.coverage(x - cx, y - cy);
            let bg = self.background.at(x, y);
            if alpha == 0.0 {
                bg
            } else {
                alpha * self.object.at(x - cx, y - cy) + (1.0 - alpha) * bg
            }
        });
        Frame::from_clamped(t_us, data).expect("finite rendering")
    }

    /// True displacement of the object between normalized times.
    pub fn displacement(&self, from: f64, to: f64) -> (f64, f64) {
        let a = self.trajectory.position(from);
        let b = self.trajectory.position(to);
        (b.0 - a.0, b.1 - a.1)
    }

    /// Whether pixel `(x, y)` is (at least half) covered by the object at `s`.
    pub fn covers(&self, x: usize, y: usize, s: f64) -> bool {
        let (cx, cy) = self.trajectory.position(s);
        self.shape.coverage(x as f64 - cx, y as f64 - cy) >= 0.5
    }

    /// Whether pixel `(x, y)` lies at least `margin` pixels inside the
    /// object at `s`.
    pub fn interior(&self, x: usize, y: usize, s: f64, margin: f64) -> bool {
        let (cx, cy) = self.trajectory.position(s);
        self.shape.depth(x as f64 - cx, y as f64 - cy) >= margin
    }
}

/// Key frames, densely simulated events and withheld-frame ground truth.
#[derive(Debug, Clone)]
pub struct SyntheticSequence {
    /// `frames` uniformly spaced frames covering the sequence.
    pub frames: Vec<Frame>,
    pub events: EventStream,
    pub frame_interval_us: u64,
}

/// Renders `frames` frames spaced `frame_interval_us` apart over the whole
/// trajectory and simulates events from `substeps` renderings per interval.
pub fn render_sequence(
    scene: &MovingObjectScene,
    frames: usize,
    frame_interval_us: u64,
    substeps: usize,
    sim: &SimulatorConfig,
) -> Result<SyntheticSequence> {
    assert!(frames >= 2 && substeps >= 1 && frame_interval_us as usize >= substeps);
    let intervals = frames - 1;
    let total_steps = intervals * substeps;
    let duration = intervals as u64 * frame_interval_us;
    let dense: Vec<Frame> = (0..=total_steps)
        .map(|i| {
            let s = i as f64 / total_steps as f64;
            let t = (duration as f64 * s).round() as u64;
            scene.render(s, t)
        })
        .collect();
    let events = simulate_events(&dense, sim)?;
    let frames = dense.into_iter().step_by(substeps).collect();
    Ok(SyntheticSequence { frames, events, frame_interval_us })
}

/// Default textured scene used across the test suites: an object on a
/// background, `size×size` pixels, moving along `trajectory`. Both layers
/// use [`Texture::two_band`].
pub fn textured_scene(size: usize, seed: u64, shape: Shape, trajectory: Trajectory) -> MovingObjectScene {
    MovingObjectScene {
        width: size,
        height: size,
        background: Texture::two_band(seed, 0.45, 0.9),
        object: Texture::two_band(seed.wrapping_add(1000), 0.55, 0.9),
        shape,
        trajectory,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn texture_translation_is_exact() {
        let t = Texture::random(3, 0.5, 0.3, 4, 6.0, 12.0);
        assert!((t.at(1.5, 2.0) - t.at(1.5, 2.0)).abs() == 0.0);
        assert!(t.at(0.0, 0.0) <= 0.8 + 1e-12 && t.at(0.0, 0.0) >= 0.2 - 1e-12);
    }

    #[test]
    fn parabola_apex() {
        let tr = Trajectory::Parabola { start: (0.0, 10.0), end: (20.0, 10.0), apex: 5.0 };
        assert_eq!(tr.position(0.5), (10.0, 5.0));
        assert_eq!(tr.position(1.0), (20.0, 10.0));
    }

    #[test]
    fn sequence_frames_and_events() {
        let scene = textured_scene(24, 1, Shape::Disc { radius: 5.0 }, Trajectory::Linear { start: (8.0, 12.0), end: (16.0, 12.0) });
        let seq = render_sequence(&scene, 3, 1000, 8, &SimulatorConfig::with_threshold(0.1)).unwrap();
        assert_eq!(seq.frames.len(), 3);
        assert_eq!(seq.frames.iter().map(Frame::t).collect::<Vec<_>>(), vec![0, 1000, 2000]);
        assert!(!seq.events.is_empty());
        assert_eq!(seq.frames[2], scene.render(1.0, 2000));
    }
}
