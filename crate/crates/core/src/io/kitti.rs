use std::io::Cursor;
use std::path::Path;

use image::codecs::png::PngEncoder;
use image::{DynamicImage, ImageBuffer, ImageEncoder, ImageFormat, Rgb};

use crate::error::{Error, Result};
use crate::fields::{FlowField, PixelGrid};

const SCALE: f64 = 64.0;
const OFFSET: f64 = 32768.0;

fn quantize(value: f64) -> Option<u16> {
    if value.abs() >= 512.0 {
        return None;
    }
    let q = (value * SCALE + OFFSET).round();
    (0.0..=65535.0).contains(&q).then_some(q as u16)
}

pub fn encode_kitti_png(flow: &FlowField) -> Result<Vec<u8>> {
    let grid = flow.grid();
    let mut raw: Vec<u16> = Vec::with_capacity(grid.len() * 3);
    for i in 0..grid.len() {
        match flow.get_index(i) {
            Some((u, v)) => {
                let (x, y) = grid.coords(i);
                let oob = || Error::OutOfRange {
                    x: x as usize,
                    y: y as usize,
                };
                raw.push(quantize(u).ok_or_else(oob)?);
                raw.push(quantize(v).ok_or_else(oob)?);
                raw.push(1);
            }
            None => raw.extend_from_slice(&[OFFSET as u16, OFFSET as u16, 0]),
        }
    }
    let (w, h) = (grid.width as u32, grid.height as u32);
    let bytes: Vec<u8> = raw.iter().flat_map(|s| s.to_ne_bytes()).collect();
    let mut out = Vec::new();
    PngEncoder::new(Cursor::new(&mut out)).write_image(
        &bytes,
        w,
        h,
        image::ExtendedColorType::Rgb16,
    )?;
    Ok(out)
}

pub fn decode_kitti_png(bytes: &[u8]) -> Result<FlowField> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)
        .map_err(|e| Error::MalformedImage(e.to_string()))?;
    let buf: ImageBuffer<Rgb<u16>, Vec<u16>> = match img {
        DynamicImage::ImageRgb16(b) => b,
        other => {
            return Err(Error::MalformedImage(format!(
                "expected 16-bit RGB flow image, found {:?}",
                other.color()
            )))
        }
    };
    let grid = PixelGrid::new(buf.width() as usize, buf.height() as usize);
    let mut u = Vec::with_capacity(grid.len());
    let mut v = Vec::with_capacity(grid.len());
    let mut valid = Vec::with_capacity(grid.len());
    for px in buf.pixels() {
        let [a, b, c] = px.0;
        u.push((a as f64 - OFFSET) / SCALE);
        v.push((b as f64 - OFFSET) / SCALE);
        valid.push(c != 0);
    }
    FlowField::new(grid, u, v, valid)
}

pub fn read_kitti_png(path: impl AsRef<Path>) -> Result<FlowField> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::from(e).at(path))?;
    decode_kitti_png(&bytes).map_err(|e| e.at(path))
}

pub fn write_kitti_png(path: impl AsRef<Path>, flow: &FlowField) -> Result<()> {
    super::write_atomic(path.as_ref(), &encode_kitti_png(flow)?)
}
