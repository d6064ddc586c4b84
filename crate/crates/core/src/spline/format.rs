//! `SPL1` spline file: magic `SPL1`, little-endian `u32` width, height and
//! `K`, then `K·3` planes (dx, dy, priority per control point) of
//! row-major little-endian `f32`.

use std::fs;
use std::path::Path;

use ndarray::Array4;

use super::field::SplineField;
use crate::error::{Error, IoContext, Result};

pub const SPL1_MAGIC: &[u8; 4] = b"SPL1";

pub fn encode_spl1(field: &SplineField) -> Vec<u8> {
    let (h, w) = field.dims();
    let k = field.control_points();
    let mut out = Vec::with_capacity(16 + 4 * field.control().len());
    out.extend_from_slice(SPL1_MAGIC);
    for v in [w as u32, h as u32, k as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in field.control().iter() {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

pub fn decode_spl1(bytes: &[u8], path: &Path) -> Result<SplineField> {
    if bytes.len() < 16 {
        return Err(Error::parse(path, "offset 0", "truncated SPL1 header"));
    }
    if &bytes[..4] != SPL1_MAGIC {
        return Err(Error::parse(path, "offset 0", "bad magic, expected SPL1"));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
    let (w, h, k) = (word(0), word(1), word(2));
    let count = k
        .checked_mul(3)
        .and_then(|n| n.checked_mul(h))
        .and_then(|n| n.checked_mul(w))
        .ok_or_else(|| Error::parse(path, "offset 4", "implausible dimensions"))?;
    let body = &bytes[16..];
    if body.len() != 4 * count {
        return Err(Error::parse(
            path,
            format!("offset {}", 16 + body.len().min(4 * count)),
            format!("expected {} bytes of control data, found {}", 4 * count, body.len()),
        ));
    }
    let values: Vec<f64> = body
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
        .collect();
    let control = Array4::from_shape_vec((k, 3, h, w), values).expect("length checked");
    SplineField::new(control).map_err(|e| Error::parse(path, "body", e.to_string()))
}

pub fn write_spl1(path: &Path, field: &SplineField) -> Result<()> {
    fs::write(path, encode_spl1(field)).at(path)?;
    Ok(())
}

pub fn read_spl1(path: &Path) -> Result<SplineField> {
    decode_spl1(&fs::read(path).at(path)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_at_f32_precision() {
        let mut c = Array4::from_shape_fn((4, 3, 3, 5), |(k, ch, y, x)| (k * 7 + ch * 3 + y * 5 + x) as f64 * 0.25);
        c.slice_mut(ndarray::s![0, 0..2, .., ..]).fill(0.0);
        let field = SplineField::new(c).unwrap();
        let back = decode_spl1(&encode_spl1(&field), Path::new("x")).unwrap();
        assert_eq!(back, field);
    }

    #[test]
    fn rejects_truncation_and_constraint_violation() {
        let field = SplineField::zeros(3, 2, 2).unwrap();
        let mut bytes = encode_spl1(&field);
        assert!(decode_spl1(&bytes[..bytes.len() - 1], Path::new("x")).is_err());
        // first dx value of control point 0
        bytes[16..20].copy_from_slice(&1.0f32.to_le_bytes());
        assert!(decode_spl1(&bytes, Path::new("x")).is_err());
    }
}
