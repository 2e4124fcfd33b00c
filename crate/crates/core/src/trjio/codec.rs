//! Lossy coordinate payload codec: positions are quantized to integers at a
//! fixed precision, delta-encoded against the previous atom per component,
//! zigzag-mapped and written as LEB128 varints.

use crate::error::{Error, Result};
use crate::model::Vec3;

/// Quantized magnitudes beyond this cannot be represented exactly in `f64`.
const MAX_QUANTIZED: f64 = 9.0e15;

#[inline]
pub fn zigzag(n: i64) -> u64 {
    ((n << 1) ^ (n >> 63)) as u64
}

#[inline]
pub fn unzigzag(z: u64) -> i64 {
    ((z >> 1) as i64) ^ -((z & 1) as i64)
}

pub fn write_varint(mut v: u64, out: &mut Vec<u8>) {
    while v >= 0x80 {
        out.push((v as u8) | 0x80);
        v >>= 7;
    }
    out.push(v as u8);
}

/// Reads one varint from `buf` starting at `*pos`, advancing `*pos`.
pub fn read_varint(buf: &[u8], pos: &mut usize) -> Option<u64> {
    let mut value = 0u64;
    let mut shift = 0u32;
    loop {
        let byte = *buf.get(*pos)?;
        *pos += 1;
        if shift == 63 && byte > 1 {
            return None;
        }
        value |= u64::from(byte & 0x7f) << shift;
        if byte & 0x80 == 0 {
            return Some(value);
        }
        shift += 7;
        if shift > 63 {
            return None;
        }
    }
}

pub fn quantize(coord: f64, precision: f64) -> Result<i64> {
    let scaled = (coord * precision).round();
    if !scaled.is_finite() || scaled.abs() > MAX_QUANTIZED {
        return Err(Error::invalid(format!(
            "coordinate {coord} not representable at precision {precision}"
        )));
    }
    Ok(scaled as i64)
}

pub fn encode_positions(positions: &[Vec3], precision: f64, out: &mut Vec<u8>) -> Result<()> {
    out.clear();
    let mut previous = [0i64; 3];
    for p in positions {
        for k in 0..3 {
            let q = quantize(p[k], precision)?;
            write_varint(zigzag(q - previous[k]), out);
            previous[k] = q;
        }
    }
    Ok(())
}

/// Decodes exactly `n_atoms` positions; returns `None` if the stream is
/// malformed, short, or has trailing bytes.
pub fn decode_positions(payload: &[u8], n_atoms: usize, precision: f64) -> Option<Vec<Vec3>> {
    let mut pos = 0;
    let mut previous = [0i64; 3];
    let mut out = Vec::with_capacity(n_atoms);
    for _ in 0..n_atoms {
        let mut p = [0.0; 3];
        for k in 0..3 {
            let delta = unzigzag(read_varint(payload, &mut pos)?);
            previous[k] = previous[k].wrapping_add(delta);
            p[k] = previous[k] as f64 / precision;
        }
        out.push(p);
    }
    (pos == payload.len()).then_some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zigzag_small_values() {
        assert_eq!(zigzag(0), 0);
        assert_eq!(zigzag(-1), 1);
        assert_eq!(zigzag(1), 2);
        assert_eq!(zigzag(-2), 3);
        assert_eq!(zigzag(i64::MIN), u64::MAX);
    }

    #[test]
    fn minus_one_is_single_byte() {
        let mut out = Vec::new();
        write_varint(zigzag(-1), &mut out);
        assert_eq!(out, vec![0x01]);
    }

    #[test]
    fn varint_multi_byte() {
        let mut out = Vec::new();
        write_varint(300, &mut out);
        assert_eq!(out, vec![0xac, 0x02]);
        let mut pos = 0;
        assert_eq!(read_varint(&out, &mut pos), Some(300));
        assert_eq!(pos, 2);
    }

    #[test]
    fn varint_rejects_truncation_and_overflow() {
        let mut pos = 0;
        assert_eq!(read_varint(&[0x80], &mut pos), None);
        let overlong = [0xff; 11];
        let mut pos = 0;
        assert_eq!(read_varint(&overlong, &mut pos), None);
    }

    #[test]
    fn quantization_bound_example() {
        let mut buf = Vec::new();
        encode_positions(&[[1.23456, 0.0, -1.23456]], 1000.0, &mut buf).unwrap();
        let back = decode_positions(&buf, 1, 1000.0).unwrap();
        assert!((back[0][0] - 1.23456).abs() <= 0.0005);
        assert!((back[0][2] + 1.23456).abs() <= 0.0005);
    }

    #[test]
    fn decode_rejects_trailing_bytes() {
        let mut buf = Vec::new();
        encode_positions(&[[0.1, 0.2, 0.3]], 1000.0, &mut buf).unwrap();
        buf.push(0);
        assert!(decode_positions(&buf, 1, 1000.0).is_none());
        buf.pop();
        assert!(decode_positions(&buf, 2, 1000.0).is_none());
    }

    #[test]
    fn rejects_unrepresentable() {
        assert!(quantize(f64::NAN, 1000.0).is_err());
        assert!(quantize(1e20, 1000.0).is_err());
    }

    proptest! {
        #[test]
        fn varint_round_trip(v in any::<u64>()) {
            let mut out = Vec::new();
            write_varint(v, &mut out);
            let mut pos = 0;
            prop_assert_eq!(read_varint(&out, &mut pos), Some(v));
            prop_assert_eq!(pos, out.len());
        }

        #[test]
        fn zigzag_round_trip(n in any::<i64>()) {
            prop_assert_eq!(unzigzag(zigzag(n)), n);
        }

        #[test]
        fn lossy_bound(points in prop::collection::vec(prop::array::uniform3(-500.0f64..500.0), 1..64),
                       precision in prop::sample::select(vec![10.0, 100.0, 1000.0, 10000.0])) {
            let mut buf = Vec::new();
            encode_positions(&points, precision, &mut buf).unwrap();
            let back = decode_positions(&buf, points.len(), precision).unwrap();
            for (p, q) in points.iter().zip(&back) {
                for k in 0..3 {
                    prop_assert!((p[k] - q[k]).abs() <= 0.5 / precision + 1e-12);
                }
            }
        }
    }
}
