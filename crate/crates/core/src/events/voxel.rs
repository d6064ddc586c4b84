use std::fs;
use std::path::Path;

use ndarray::Array3;

use super::stream::{Event, EventStream};
use crate::error::{Error, IoContext, Result};

pub const VOX1_MAGIC: &[u8; 4] = b"VOX1";

/// Default number of temporal bins.
pub const DEFAULT_BINS: usize = 5;

/// Events accumulated into `B` temporal bins with bilinear weights in time.
/// Polarities share bins (signed accumulation).
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    t_a: u64,
    t_b: u64,
    data: Array3<f64>,
}

impl VoxelGrid {
    pub fn bins(&self) -> usize {
        self.data.dim().0
    }

    pub fn window(&self) -> (u64, u64) {
        (self.t_a, self.t_b)
    }

    /// `B×H×W`.
    pub fn data(&self) -> &Array3<f64> {
        &self.data
    }

    pub fn into_data(self) -> Array3<f64> {
        self.data
    }

    /// `VOX1` file: magic, little-endian `u32` bins, width, height, `u64`
    /// window start and end, then `B` row-major `f32` planes.
    pub fn encode(&self) -> Vec<u8> {
        let (b, h, w) = self.data.dim();
        let mut out = Vec::with_capacity(32 + 4 * self.data.len());
        out.extend_from_slice(VOX1_MAGIC);
        for v in [b as u32, w as u32, h as u32] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&self.t_a.to_le_bytes());
        out.extend_from_slice(&self.t_b.to_le_bytes());
        for v in self.data.iter() {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.encode()).at(path)?;
        Ok(())
    }
}

/// Incremental voxel-grid accumulator. Feeding a stream in consecutive
/// chunks yields the same grid, bit for bit, as one batch build.
#[derive(Debug, Clone)]
pub struct VoxelGridBuilder {
    t_a: u64,
    t_b: u64,
    data: Array3<f64>,
}

impl VoxelGridBuilder {
    pub fn new(width: u32, height: u32, t_a: u64, t_b: u64, bins: usize) -> Result<Self> {
        if bins == 0 {
            return Err(Error::invalid("voxel grid needs at least one bin"));
        }
        if t_a >= t_b {
            return Err(Error::invalid(format!("empty voxel window [{t_a}, {t_b}]")));
        }
        Ok(Self {
            t_a,
            t_b,
            data: Array3::zeros((bins, height as usize, width as usize)),
        })
    }

    pub fn push(&mut self, events: &[Event]) {
        let bins = self.data.dim().0;
        let span = (self.t_b - self.t_a) as f64;
        let last = (bins - 1) as f64;
        for e in events {
            if e.t < self.t_a || e.t > self.t_b {
                continue;
            }
            let (x, y) = (e.x as usize, e.y as usize);
            let p = e.polarity.value();
            let tn = (e.t - self.t_a) as f64 / span * last;
            let lower = tn.floor();
            let frac = tn - lower;
            let b = lower as usize;
            if frac == 0.0 || b + 1 >= bins {
                self.data[[b.min(bins - 1), y, x]] += p;
            } else {
                self.data[[b, y, x]] += p * (1.0 - frac);
                self.data[[b + 1, y, x]] += p * frac;
            }
        }
    }

    pub fn finish(self) -> VoxelGrid {
        VoxelGrid { t_a: self.t_a, t_b: self.t_b, data: self.data }
    }
}

/// Builds the voxel grid of the events in `[t_a, t_b]`.
pub fn build_voxel_grid(ev: &EventStream, t_a: u64, t_b: u64, bins: usize) -> Result<VoxelGrid> {
    let mut builder = VoxelGridBuilder::new(ev.width(), ev.height(), t_a, t_b, bins)?;
    builder.push(ev.window_closed(t_a, t_b));
    Ok(builder.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::Polarity;
    use proptest::prelude::*;

    fn single(t: u64, p: Polarity) -> EventStream {
        EventStream::new(3, 2, vec![Event::new(t, 1, 1, p)]).unwrap()
    }

    #[test]
    fn event_on_bin_center() {
        // t* = 500/1000 * 4 = 2.0
        let g = build_voxel_grid(&single(500, Polarity::Positive), 0, 1000, 5).unwrap();
        assert_eq!(g.data()[[2, 1, 1]], 1.0);
        assert_eq!(g.data().sum(), 1.0);
        assert_eq!(g.data().iter().filter(|v| **v != 0.0).count(), 1);
    }

    #[test]
    fn event_split_between_bins() {
        // t* = 312.5/1000 * 4 = 1.25
        let g = build_voxel_grid(&single(3125, Polarity::Negative), 0, 10_000, 5).unwrap();
        assert_eq!(g.data()[[1, 1, 1]], -0.75);
        assert_eq!(g.data()[[2, 1, 1]], -0.25);
    }

    #[test]
    fn encodes_header_and_planes() {
        let g = build_voxel_grid(&single(500, Polarity::Positive), 0, 1000, 5).unwrap();
        let bytes = g.encode();
        assert_eq!(&bytes[..4], VOX1_MAGIC);
        assert_eq!(bytes.len(), 32 + 4 * 5 * 2 * 3);
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 5);
        assert_eq!(u64::from_le_bytes(bytes[24..32].try_into().unwrap()), 1000);
        // bin 2, y 1, x 1
        let at = 32 + 4 * (2 * 6 + 3 + 1);
        assert_eq!(f32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()), 1.0);
    }

    #[test]
    fn empty_stream_gives_zero_grid() {
        let g = build_voxel_grid(&EventStream::empty(4, 3), 0, 10, 5).unwrap();
        assert_eq!(g.data().dim(), (5, 3, 4));
        assert!(g.data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn endpoints_and_outside_window() {
        let s = EventStream::new(
            2,
            1,
            vec![
                Event::new(5, 0, 0, Polarity::Positive),
                Event::new(10, 0, 0, Polarity::Positive),
                Event::new(20, 1, 0, Polarity::Positive),
                Event::new(25, 1, 0, Polarity::Positive),
            ],
        )
        .unwrap();
        let g = build_voxel_grid(&s, 10, 20, 3).unwrap();
        assert_eq!(g.data()[[0, 0, 0]], 1.0);
        assert_eq!(g.data()[[2, 0, 1]], 1.0);
        assert_eq!(g.data().sum(), 2.0);
    }

    #[test]
    fn single_bin() {
        let g = build_voxel_grid(&single(7, Polarity::Positive), 0, 10, 1).unwrap();
        assert_eq!(g.data()[[0, 1, 1]], 1.0);
    }

    #[test]
    fn rejects_bad_arguments() {
        let s = EventStream::empty(2, 2);
        assert!(build_voxel_grid(&s, 10, 10, 5).is_err());
        assert!(build_voxel_grid(&s, 0, 10, 0).is_err());
    }

    fn arb_stream() -> impl Strategy<Value = EventStream> {
        prop::collection::vec((0u64..10_000, 0u16..8, 0u16..6, any::<bool>()), 0..300).prop_map(|mut v| {
            v.sort_by_key(|e| e.0);
            let events = v
                .into_iter()
                .map(|(t, x, y, p)| Event::new(t, x, y, if p { Polarity::Positive } else { Polarity::Negative }))
                .collect();
            EventStream::new(8, 6, events).unwrap()
        })
    }

    proptest! {
        #[test]
        fn mass_is_conserved(s in arb_stream(), t_a in 0u64..4000, len in 1u64..8000, bins in 1usize..9) {
            let t_b = t_a + len;
            let g = build_voxel_grid(&s, t_a, t_b, bins).unwrap();
            let expected: f64 = s.window_closed(t_a, t_b).iter().map(|e| e.polarity.value()).sum();
            let total = g.data().sum();
            prop_assert!((total - expected).abs() <= 1e-4 * expected.abs().max(1.0));
            prop_assert!(g.data().iter().all(|v| v.is_finite()));
        }

        #[test]
        fn chunked_accumulation_is_bit_exact(s in arb_stream(), cuts in prop::collection::vec(0usize..300, 0..5)) {
            let batch = build_voxel_grid(&s, 0, 10_000, 5).unwrap();
            let mut builder = VoxelGridBuilder::new(8, 6, 0, 10_000, 5).unwrap();
            let mut cuts: Vec<usize> = cuts.into_iter().map(|c| c.min(s.len())).collect();
            cuts.sort_unstable();
            let mut start = 0;
            for c in cuts.into_iter().chain(std::iter::once(s.len())) {
                builder.push(&s.events()[start..c]);
                start = c;
            }
            prop_assert_eq!(builder.finish(), batch);
        }
    }
}
