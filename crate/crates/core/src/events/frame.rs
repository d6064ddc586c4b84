use ndarray::{Array2, Array3, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Rec. 601 luma weights.
const LUMA: [f64; 3] = [0.299, 0.587, 0.114];

/// An intensity image with 1 or 3 channels, values in `[0, 1]`, stamped
/// with a capture time in microseconds.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    t: u64,
    data: Array3<f64>,
}

impl Frame {
    /// Validates channel count and value range.
    pub fn new(t: u64, data: Array3<f64>) -> Result<Self> {
        let (c, h, w) = data.dim();
        if c != 1 && c != 3 {
            return Err(Error::invalid(format!("frame must have 1 or 3 channels, got {c}")));
        }
        if h == 0 || w == 0 {
            return Err(Error::invalid("frame has zero size"));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid(format!("frame value {v} outside [0, 1]")));
        }
        Ok(Self { t, data })
    }

    /// Builds a frame after clamping every value into `[0, 1]`. Non-finite
    /// values are rejected.
    pub fn from_clamped(t: u64, mut data: Array3<f64>) -> Result<Self> {
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite frame value".into()));
        }
        data.mapv_inplace(|v| v.clamp(0.0, 1.0));
        Self::new(t, data)
    }

    pub fn gray(t: u64, plane: Array2<f64>) -> Result<Self> {
        Self::new(t, plane.insert_axis(Axis(0)))
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn with_time(mut self, t: u64) -> Self {
        self.t = t;
        self
    }

    pub fn channels(&self) -> usize {
        self.data.dim().0
    }

    pub fn height(&self) -> usize {
        self.data.dim().1
    }

    pub fn width(&self) -> usize {
        self.data.dim().2
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height(), self.width())
    }

    pub fn data(&self) -> &Array3<f64> {
        &self.data
    }

    pub fn into_data(self) -> Array3<f64> {
        self.data
    }

    pub fn channel(&self, c: usize) -> ArrayView2<'_, f64> {
        self.data.index_axis(Axis(0), c)
    }

    /// Luma plane; the single channel for grayscale frames.
    pub fn luma(&self) -> Array2<f64> {
        if self.channels() == 1 {
            return self.channel(0).to_owned();
        }
        let mut out = Array2::zeros(self.dims());
        for (c, w) in LUMA.iter().enumerate() {
            out.scaled_add(*w, &self.channel(c));
        }
        out
    }

    pub fn same_geometry(&self, other: &Frame) -> bool {
        self.data.dim() == other.data.dim()
    }

    pub(crate) fn check_geometry(&self, other: &Frame, what: &str) -> Result<()> {
        if self.same_geometry(other) {
            Ok(())
        } else {
            Err(Error::shape(format!(
                "{what}: frame {:?} vs {:?}",
                self.data.dim(),
                other.data.dim()
            )))
        }
    }
}

/// Pixel-wise mean of two frames; the naive interpolation baseline.
pub fn keyframe_average(a: &Frame, b: &Frame, t: u64) -> Result<Frame> {
    a.check_geometry(b, "keyframe average")?;
    let data = (a.data() + b.data()) * 0.5;
    Frame::from_clamped(t, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_out_of_range() {
        let data = Array3::from_elem((1, 2, 2), 1.5);
        assert!(Frame::new(0, data).is_err());
    }

    #[test]
    fn rejects_two_channels() {
        assert!(Frame::new(0, Array3::zeros((2, 2, 2))).is_err());
    }

    #[test]
    fn luma_of_gray_color_frame() {
        let f = Frame::new(0, Array3::from_elem((3, 2, 2), 0.4)).unwrap();
        assert!(f.luma().iter().all(|v| (v - 0.4).abs() < 1e-12));
    }
}
