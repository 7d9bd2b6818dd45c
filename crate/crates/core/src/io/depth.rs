use std::io::Cursor;
use std::path::Path;

use image::codecs::png::PngEncoder;
use image::{DynamicImage, ImageEncoder, ImageFormat};

use crate::error::{Error, Result};
use crate::fields::{PixelGrid, ScalarField};

/// Reads a single-channel 16-bit PNG; each stored value is divided by
/// `scale`. Zero marks missing depth.
pub fn read_depth_png(path: impl AsRef<Path>, scale: f64) -> Result<ScalarField> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::from(e).at(path))?;
    decode_depth_png(&bytes, scale).map_err(|e| e.at(path))
}

fn decode_depth_png(bytes: &[u8], scale: f64) -> Result<ScalarField> {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "depth scale must be positive, got {scale}"
        )));
    }
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)
        .map_err(|e| Error::MalformedImage(e.to_string()))?;
    let buf = match img {
        DynamicImage::ImageLuma16(b) => b,
        other => return Err(Error::UnsupportedBitDepth(format!("{:?}", other.color()))),
    };
    let grid = PixelGrid::new(buf.width() as usize, buf.height() as usize);
    let raw = buf.into_raw();
    Ok(ScalarField::from_fn(grid, |x, y| {
        let v = raw[y * grid.width + x];
        (v != 0).then(|| v as f64 / scale)
    }))
}

/// Writes depth as a 16-bit PNG storing `round(depth · scale)`; invalid
/// pixels become zero.
pub fn write_depth_png(path: impl AsRef<Path>, depth: &ScalarField, scale: f64) -> Result<()> {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "depth scale must be positive, got {scale}"
        )));
    }
    let grid = depth.grid();
    let mut bytes = Vec::with_capacity(grid.len() * 2);
    for (i, (&v, &ok)) in depth.values().iter().zip(depth.valid()).enumerate() {
        let q = if ok { (v * scale).round() } else { 0.0 };
        if !(0.0..=65535.0).contains(&q) {
            let (x, y) = grid.coords(i);
            return Err(Error::OutOfRange {
                x: x as usize,
                y: y as usize,
            });
        }
        bytes.extend_from_slice(&(q as u16).to_ne_bytes());
    }
    let mut out = Vec::new();
    PngEncoder::new(Cursor::new(&mut out)).write_image(
        &bytes,
        grid.width as u32,
        grid.height as u32,
        image::ExtendedColorType::L16,
    )?;
    super::write_atomic(path.as_ref(), &out)
}

/// Decodes a single-channel PFM (`Pf`). Rows are stored bottom-up; a
/// negative scale means little-endian samples. Non-positive or non-finite
/// values are invalid.
pub fn decode_pfm(bytes: &[u8]) -> Result<ScalarField> {
    let mut fields = Vec::with_capacity(4);
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::MalformedHeader("header ends early".into()));
        }
        fields.push(
            std::str::from_utf8(&bytes[start..pos])
                .map_err(|_| Error::MalformedHeader("non-ascii header".into()))?,
        );
    }
    // exactly one whitespace byte separates the header from the payload
    pos += 1;
    match fields[0] {
        "Pf" => {}
        "PF" => {
            return Err(Error::MalformedHeader(
                "three-channel PFM is not a depth map".into(),
            ))
        }
        _ => return Err(Error::BadMagic),
    }
    let parse_dim = |s: &str| {
        s.parse::<i64>()
            .map_err(|_| Error::MalformedHeader(format!("bad dimension {s:?}")))
    };
    let (w, h) = (parse_dim(fields[1])?, parse_dim(fields[2])?);
    let scale: f64 = fields[3]
        .parse()
        .map_err(|_| Error::MalformedHeader(format!("bad scale {:?}", fields[3])))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::MalformedHeader(format!("bad scale {scale}")));
    }
    if w < 0 || h < 0 {
        return Err(Error::DimensionOverflow {
            width: w,
            height: h,
        });
    }
    let n = (w as usize)
        .checked_mul(h as usize)
        .filter(|n| n.checked_mul(4).is_some())
        .ok_or(Error::DimensionOverflow {
            width: w,
            height: h,
        })?;
    let expected = pos.saturating_add(n * 4);
    if bytes.len() < expected {
        return Err(Error::Truncated {
            expected,
            found: bytes.len(),
        });
    }
    let little = scale < 0.0;
    let grid = PixelGrid::new(w as usize, h as usize);
    let payload = &bytes[pos..expected];
    Ok(ScalarField::from_fn(grid, |x, y| {
        let row = grid.height - 1 - y;
        let o = 4 * (row * grid.width + x);
        let b: [u8; 4] = payload[o..o + 4].try_into().unwrap();
        let v = if little {
            f32::from_le_bytes(b)
        } else {
            f32::from_be_bytes(b)
        } as f64;
        (v.is_finite() && v > 0.0).then_some(v)
    }))
}

/// Encodes little-endian `Pf`; invalid pixels are written as `+inf`.
pub fn encode_pfm(field: &ScalarField) -> Vec<u8> {
    let grid = field.grid();
    let mut out = format!("Pf\n{} {}\n-1.0\n", grid.width, grid.height).into_bytes();
    for y in (0..grid.height).rev() {
        for x in 0..grid.width {
            let v = field.get(x, y).map_or(f32::INFINITY, |v| v as f32);
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn read_pfm(path: impl AsRef<Path>) -> Result<ScalarField> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::from(e).at(path))?;
    decode_pfm(&bytes).map_err(|e| e.at(path))
}

pub fn write_pfm(path: impl AsRef<Path>, field: &ScalarField) -> Result<()> {
    super::write_atomic(path.as_ref(), &encode_pfm(field))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pfm_round_trip_and_row_order() {
        let g = PixelGrid::new(3, 2);
        let f = ScalarField::from_fn(g, |x, y| {
            (x != 2 || y != 0).then_some(1.0 + x as f64 + 10.0 * y as f64)
        });
        let bytes = encode_pfm(&f);
        // first stored row is the bottom image row
        let header = b"Pf\n3 2\n-1.0\n".len();
        assert_eq!(&bytes[header..header + 4], &11.0f32.to_le_bytes());
        assert_eq!(decode_pfm(&bytes).unwrap(), f);
    }

    #[test]
    fn pfm_big_endian() {
        let mut bytes = b"Pf\n2 1\n1.0\n".to_vec();
        bytes.extend_from_slice(&2.5f32.to_be_bytes());
        bytes.extend_from_slice(&(-1.0f32).to_be_bytes());
        let f = decode_pfm(&bytes).unwrap();
        assert_eq!(f.get(0, 0), Some(2.5));
        assert_eq!(f.get(1, 0), None);
    }

    #[test]
    fn pfm_errors() {
        assert!(matches!(
            decode_pfm(b"P6\n1 1\n-1.0\n\0\0\0\0"),
            Err(Error::BadMagic)
        ));
        assert!(matches!(
            decode_pfm(b"Pf\n2 2\n-1.0\n\0\0"),
            Err(Error::Truncated { .. })
        ));
        assert!(matches!(
            decode_pfm(b"Pf\n2 x\n-1.0\n"),
            Err(Error::MalformedHeader(_))
        ));
        assert!(matches!(
            decode_pfm(b"Pf\n2"),
            Err(Error::MalformedHeader(_))
        ));
    }

    #[test]
    fn depth_png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.png");
        let g = PixelGrid::new(4, 3);
        let f = ScalarField::from_fn(g, |x, y| (x != 0).then(|| (x * 100 + y) as f64 / 256.0));
        write_depth_png(&path, &f, 256.0).unwrap();
        let back = read_depth_png(&path, 256.0).unwrap();
        assert_eq!(back.valid(), f.valid());
        for (a, b) in back.values().iter().zip(f.values()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn stored_value_is_divided_by_scale() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.png");
        let buf =
            image::ImageBuffer::<image::Luma<u16>, _>::from_raw(2, 1, vec![5120u16, 0]).unwrap();
        buf.save(&path).unwrap();
        let d = read_depth_png(&path, 256.0).unwrap();
        assert_eq!(d.get(0, 0), Some(20.0));
        assert_eq!(d.get(1, 0), None);
    }

    #[test]
    fn eight_bit_depth_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d8.png");
        image::GrayImage::new(2, 2).save(&path).unwrap();
        let err = read_depth_png(&path, 1.0).unwrap_err();
        assert_eq!(err.kind(), "unsupported_bit_depth");
    }
}
