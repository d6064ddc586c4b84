//! Fusion configuration and parameters.
//!
//! `FUS1` parameter files: magic `FUS1`, little-endian `u32` depth, base
//! channels, max channels, image channels and tensor count, then for each
//! tensor a `u32` rank, `rank` `u32` dimensions and the row-major `f32`
//! values. Tensors are stored scale by scale (gate convolutions in source
//! order, then the merge convolution; weight before bias), followed by the
//! output head.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array4, ArrayD, IxDyn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, IoContext, Result};
use crate::tensor::Conv3x3;

pub const FUS1_MAGIC: &[u8; 4] = b"FUS1";

/// Standard deviation of seeded parameter initialization.
pub const INIT_STD: f64 = 0.02;

/// Where fusion parameters come from.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamSource {
    File(PathBuf),
    Seed(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionConfig {
    /// Number of scales.
    pub depth: usize,
    /// Feature channels of every input pyramid and width of the finest scale.
    pub base_channels: usize,
    /// Cap on per-scale feature width.
    pub max_channels: usize,
    pub params: ParamSource,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            depth: 3,
            base_channels: 32,
            max_channels: 128,
            params: ParamSource::Seed(0),
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 {
            return Err(Error::invalid("fusion depth must be at least 1"));
        }
        if self.base_channels == 0 || self.base_channels > self.max_channels {
            return Err(Error::invalid(format!(
                "fusion channels must satisfy 0 < C <= C_max (C={}, C_max={})",
                self.base_channels, self.max_channels
            )));
        }
        Ok(())
    }

    /// Feature width of scale `l`: `min(C·2^l, C_max)`.
    pub fn width(&self, level: usize) -> usize {
        self.base_channels
            .checked_shl(level as u32)
            .unwrap_or(usize::MAX)
            .min(self.max_channels)
    }

    /// Channel count of each gated source at scale `l`: the four pyramids,
    /// then (below the coarsest scale) the upsampled previous stage.
    pub fn source_channels(&self, level: usize) -> Vec<usize> {
        let mut v = vec![self.base_channels; 4];
        if level + 1 < self.depth {
            v.push(self.width(level + 1));
        }
        v
    }

    pub fn load_params(&self, image_channels: usize) -> Result<GateParams> {
        match &self.params {
            ParamSource::Seed(seed) => GateParams::seeded(self, image_channels, *seed),
            ParamSource::File(path) => GateParams::read(path, self, image_channels),
        }
    }
}

/// Convolutions of one scale.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleParams {
    /// One gating convolution per source; input is `[source ‖ others]`.
    pub gates: Vec<Conv3x3>,
    pub merge: Conv3x3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateParams {
    /// Finest scale first.
    pub scales: Vec<ScaleParams>,
    /// Projection from the finest features to image channels.
    pub head: Conv3x3,
}

impl GateParams {
    fn build(cfg: &FusionConfig, image_channels: usize, mut make: impl FnMut(usize, usize) -> Conv3x3) -> Result<Self> {
        cfg.validate()?;
        let scales = (0..cfg.depth)
            .map(|l| {
                let sources = cfg.source_channels(l);
                let total: usize = sources.iter().sum();
                ScaleParams {
                    gates: sources.iter().map(|c| make(total, *c)).collect(),
                    merge: make(total, cfg.width(l)),
                }
            })
            .collect();
        let head = make(cfg.width(0), image_channels);
        Ok(Self { scales, head })
    }

    pub fn zeros(cfg: &FusionConfig, image_channels: usize) -> Result<Self> {
        Self::build(cfg, image_channels, Conv3x3::zeros)
    }

    /// Normal(0, 0.02) weights and biases from a ChaCha8 stream.
    pub fn seeded(cfg: &FusionConfig, image_channels: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, INIT_STD).expect("valid std");
        Self::build(cfg, image_channels, |cin, cout| Conv3x3 {
            weight: Array4::from_shape_simple_fn((cout, cin, 3, 3), || normal.sample(&mut rng)),
            bias: Array1::from_shape_simple_fn(cout, || normal.sample(&mut rng)),
        })
    }

    pub fn image_channels(&self) -> usize {
        self.head.out_channels()
    }

    fn convs(&self) -> Vec<&Conv3x3> {
        let mut out = Vec::new();
        for s in &self.scales {
            out.extend(s.gates.iter());
            out.push(&s.merge);
        }
        out.push(&self.head);
        out
    }

    fn convs_mut(&mut self) -> Vec<&mut Conv3x3> {
        let mut out = Vec::new();
        for s in &mut self.scales {
            out.extend(s.gates.iter_mut());
            out.push(&mut s.merge);
        }
        out.push(&mut self.head);
        out
    }

    pub fn is_finite(&self) -> bool {
        self.convs()
            .iter()
            .all(|c| c.weight.iter().chain(c.bias.iter()).all(|v| v.is_finite()))
    }

    pub fn encode(&self, cfg: &FusionConfig) -> Vec<u8> {
        let convs = self.convs();
        let mut out = Vec::new();
        out.extend_from_slice(FUS1_MAGIC);
        for v in [cfg.depth, cfg.base_channels, cfg.max_channels, self.image_channels(), 2 * convs.len()] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        for conv in convs {
            write_tensor(&mut out, conv.weight.shape(), conv.weight.iter());
            write_tensor(&mut out, conv.bias.shape(), conv.bias.iter());
        }
        out
    }

    pub fn decode(bytes: &[u8], path: &Path, cfg: &FusionConfig, image_channels: usize) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0, path };
        if r.take(4)? != FUS1_MAGIC {
            return Err(Error::parse(path, "offset 0", "bad magic, expected FUS1"));
        }
        let header: Vec<usize> = (0..5).map(|_| r.u32().map(|v| v as usize)).collect::<Result<_>>()?;
        let expected = [cfg.depth, cfg.base_channels, cfg.max_channels, image_channels];
        if header[..4] != expected {
            return Err(Error::parse(
                path,
                "offset 4",
                format!("file is for depth/C/C_max/image channels {:?}, configuration needs {:?}", &header[..4], expected),
            ));
        }
        let mut params = Self::zeros(cfg, image_channels)?;
        let convs = params.convs_mut();
        if header[4] != 2 * convs.len() {
            return Err(Error::parse(path, "offset 20", format!("expected {} tensors, found {}", 2 * convs.len(), header[4])));
        }
        for (i, conv) in convs.into_iter().enumerate() {
            let w = r.tensor()?;
            if w.shape() != conv.weight.shape() {
                return Err(Error::parse(path, format!("tensor {}", 2 * i), format!("shape {:?}, expected {:?}", w.shape(), conv.weight.shape())));
            }
            conv.weight.assign(&w.into_dimensionality::<ndarray::Ix4>().expect("rank checked"));
            let b = r.tensor()?;
            if b.shape() != conv.bias.shape() {
                return Err(Error::parse(path, format!("tensor {}", 2 * i + 1), format!("shape {:?}, expected {:?}", b.shape(), conv.bias.shape())));
            }
            conv.bias.assign(&b.into_dimensionality::<ndarray::Ix1>().expect("rank checked"));
        }
        if r.pos != bytes.len() {
            return Err(Error::parse(path, format!("offset {}", r.pos), "trailing bytes"));
        }
        if !params.is_finite() {
            return Err(Error::parse(path, "body", "non-finite parameter"));
        }
        Ok(params)
    }

    pub fn write(&self, path: &Path, cfg: &FusionConfig) -> Result<()> {
        fs::write(path, self.encode(cfg)).at(path)?;
        Ok(())
    }

    pub fn read(path: &Path, cfg: &FusionConfig, image_channels: usize) -> Result<Self> {
        Self::decode(&fs::read(path).at(path)?, path, cfg, image_channels)
    }
}

fn write_tensor<'a>(out: &mut Vec<u8>, shape: &[usize], values: impl Iterator<Item = &'a f64>) {
    out.extend_from_slice(&(shape.len() as u32).to_le_bytes());
    for d in shape {
        out.extend_from_slice(&(*d as u32).to_le_bytes());
    }
    for v in values {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::parse(self.path, format!("offset {}", self.pos), "truncated file")),
        }
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn tensor(&mut self) -> Result<ArrayD<f64>> {
        let rank = self.u32()? as usize;
        if rank > 8 {
            return Err(Error::parse(self.path, format!("offset {}", self.pos - 4), format!("implausible rank {rank}")));
        }
        let dims: Vec<usize> = (0..rank).map(|_| self.u32().map(|d| d as usize)).collect::<Result<_>>()?;
        let n: usize = dims.iter().product();
        let raw = self.take(n.checked_mul(4).unwrap_or(usize::MAX))?;
        let values = raw.chunks_exact(4).map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap()))).collect();
        Ok(ArrayD::from_shape_vec(IxDyn(&dims), values).expect("size computed"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> FusionConfig {
        FusionConfig { depth: 3, base_channels: 4, max_channels: 8, params: ParamSource::Seed(1) }
    }

    #[test]
    fn widths_are_capped() {
        let cfg = FusionConfig::default();
        assert_eq!((cfg.width(0), cfg.width(1), cfg.width(2), cfg.width(3)), (32, 64, 128, 128));
        assert_eq!(cfg.source_channels(2), vec![32; 4]);
        assert_eq!(cfg.source_channels(0), vec![32, 32, 32, 32, 64]);
    }

    #[test]
    fn shapes_follow_config() {
        let cfg = small();
        let p = GateParams::zeros(&cfg, 3).unwrap();
        assert_eq!(p.scales.len(), 3);
        assert_eq!(p.scales[0].gates.len(), 5);
        assert_eq!(p.scales[2].gates.len(), 4);
        assert_eq!(p.scales[0].gates[4].weight.dim(), (8, 24, 3, 3));
        assert_eq!(p.scales[1].merge.weight.dim(), (8, 24, 3, 3));
        assert_eq!(p.head.weight.dim(), (3, 4, 3, 3));
    }

    #[test]
    fn seeded_is_reproducible() {
        let a = GateParams::seeded(&small(), 1, 42).unwrap();
        let b = GateParams::seeded(&small(), 1, 42).unwrap();
        let c = GateParams::seeded(&small(), 1, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn file_round_trip_at_f32_precision() {
        let cfg = small();
        let p = GateParams::seeded(&cfg, 3, 7).unwrap();
        let back = GateParams::decode(&p.encode(&cfg), Path::new("p"), &cfg, 3).unwrap();
        for (a, b) in p.convs().iter().zip(back.convs()) {
            for (x, y) in a.weight.iter().zip(b.weight.iter()) {
                assert_eq!(*x as f32, *y as f32);
            }
        }
    }

    #[test]
    fn rejects_mismatched_file() {
        let cfg = small();
        let bytes = GateParams::seeded(&cfg, 3, 7).unwrap().encode(&cfg);
        assert!(GateParams::decode(&bytes, Path::new("p"), &cfg, 1).is_err());
        assert!(GateParams::decode(&bytes[..bytes.len() - 2], Path::new("p"), &cfg, 3).is_err());
        let other = FusionConfig { depth: 2, ..cfg.clone() };
        assert!(GateParams::decode(&bytes, Path::new("p"), &other, 3).is_err());
    }

    #[test]
    fn invalid_config() {
        let cfg = FusionConfig { base_channels: 16, max_channels: 8, ..small() };
        assert!(cfg.validate().is_err());
        assert!(FusionConfig { depth: 0, ..small() }.validate().is_err());
    }
}
