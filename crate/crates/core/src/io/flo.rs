use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fields::{FlowField, PixelGrid};

/// Tag at the start of every `.flo` file; its little-endian bytes spell
/// `PIEH`.
pub const FLO_MAGIC: f32 = 202021.25;

/// Component value written for invalid pixels.
pub const FLO_INVALID: f32 = 1e10;

/// Components whose magnitude exceeds this are read as invalid.
const INVALID_THRESHOLD: f32 = 1e9;

const HEADER_LEN: usize = 12;

pub fn encode_flo(flow: &FlowField) -> Result<Vec<u8>> {
    let grid = flow.grid();
    let (w, h) = (grid.width, grid.height);
    if w > i32::MAX as usize || h > i32::MAX as usize {
        return Err(Error::DimensionOverflow {
            width: w as i64,
            height: h as i64,
        });
    }
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * grid.len());
    out.extend_from_slice(&FLO_MAGIC.to_le_bytes());
    out.extend_from_slice(&(w as i32).to_le_bytes());
    out.extend_from_slice(&(h as i32).to_le_bytes());
    for i in 0..grid.len() {
        let (u, v) = match flow.get_index(i) {
            Some((u, v)) => {
                let (u, v) = (u as f32, v as f32);
                if !(u.abs() <= INVALID_THRESHOLD && v.abs() <= INVALID_THRESHOLD) {
                    let (x, y) = grid.coords(i);
                    return Err(Error::OutOfRange {
                        x: x as usize,
                        y: y as usize,
                    });
                }
                (u, v)
            }
            None => (FLO_INVALID, FLO_INVALID),
        };
        out.extend_from_slice(&u.to_le_bytes());
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

fn f32_at(bytes: &[u8], offset: usize) -> f32 {
    f32::from_le_bytes(bytes[offset..offset + 4].try_into().unwrap())
}

fn i32_at(bytes: &[u8], offset: usize) -> i32 {
    i32::from_le_bytes(bytes[offset..offset + 4].try_into().unwrap())
}

pub fn decode_flo(bytes: &[u8]) -> Result<FlowField> {
    if bytes.len() < 4 || f32_at(bytes, 0) != FLO_MAGIC {
        return Err(Error::BadMagic);
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    let (w, h) = (i32_at(bytes, 4), i32_at(bytes, 8));
    let overflow = Error::DimensionOverflow {
        width: w as i64,
        height: h as i64,
    };
    if w < 0 || h < 0 {
        return Err(overflow);
    }
    let (w, h) = (w as usize, h as usize);
    let payload = w
        .checked_mul(h)
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| n.checked_add(HEADER_LEN))
        .ok_or(overflow)?;
    if bytes.len() < payload {
        return Err(Error::Truncated {
            expected: payload,
            found: bytes.len(),
        });
    }
    let grid = PixelGrid::new(w, h);
    let mut u = Vec::with_capacity(grid.len());
    let mut v = Vec::with_capacity(grid.len());
    let mut valid = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let a = f32_at(bytes, HEADER_LEN + 8 * i);
        let b = f32_at(bytes, HEADER_LEN + 8 * i + 4);
        // NaN fails both comparisons and is read as invalid
        let ok = a.abs() <= INVALID_THRESHOLD && b.abs() <= INVALID_THRESHOLD;
        u.push(a as f64);
        v.push(b as f64);
        valid.push(ok);
    }
    FlowField::new(grid, u, v, valid)
}

pub fn read_flo(path: impl AsRef<Path>) -> Result<FlowField> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::from(e).at(path))?;
    decode_flo(&bytes).map_err(|e| e.at(path))
}

pub fn write_flo(path: impl AsRef<Path>, flow: &FlowField) -> Result<()> {
    let path = path.as_ref();
    super::write_atomic(path, &encode_flo(flow)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn magic_spells_pieh() {
        assert_eq!(&FLO_MAGIC.to_le_bytes(), b"PIEH");
    }

    #[test]
    fn two_by_one_layout() {
        let g = PixelGrid::new(2, 1);
        let f = FlowField::new(g, vec![1.0, 3.0], vec![2.0, 4.0], vec![true; 2]).unwrap();
        let bytes = encode_flo(&f).unwrap();
        assert_eq!(bytes.len(), 12 + 16);
        assert_eq!(&bytes[0..4], b"PIEH");
        assert_eq!(&bytes[4..8], &2i32.to_le_bytes());
        assert_eq!(&bytes[8..12], &1i32.to_le_bytes());
        assert_eq!(&bytes[12..16], &1.0f32.to_le_bytes());
        assert_eq!(&bytes[24..28], &4.0f32.to_le_bytes());
        assert_eq!(decode_flo(&bytes).unwrap(), f);
    }

    #[test]
    fn invalid_pixels_round_trip_via_sentinel() {
        let g = PixelGrid::new(3, 2);
        let f = FlowField::from_fn(g, |x, y| (x != 1.0).then_some((x * 0.5, -y)));
        let back = decode_flo(&encode_flo(&f).unwrap()).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn rejects_bad_input() {
        let g = PixelGrid::new(2, 2);
        let mut bytes = encode_flo(&FlowField::zeros(g)).unwrap();
        assert!(matches!(
            decode_flo(&bytes[..20]),
            Err(Error::Truncated { .. })
        ));
        assert!(matches!(decode_flo(&bytes[..2]), Err(Error::BadMagic)));
        bytes[4..8].copy_from_slice(&(-3i32).to_le_bytes());
        assert!(matches!(
            decode_flo(&bytes),
            Err(Error::DimensionOverflow { .. })
        ));
        bytes[0] = b'X';
        assert!(matches!(decode_flo(&bytes), Err(Error::BadMagic)));
    }

    #[test]
    fn huge_valid_values_cannot_be_encoded() {
        let f = FlowField::constant(PixelGrid::new(1, 1), 2e9, 0.0);
        assert!(matches!(encode_flo(&f), Err(Error::OutOfRange { .. })));
    }
}
