use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, GrayImage, ImageFormat, RgbImage};

use crate::error::{Error, Result};
use crate::fields::{Image, PixelGrid};

/// Loads any image the `image` crate understands. Grayscale inputs stay
/// single-channel; everything else becomes RGB. Alpha is dropped.
pub fn read_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let img = image::open(path).map_err(|e| Error::from(e).at(path))?;
    let grid = PixelGrid::new(img.width() as usize, img.height() as usize);
    let gray = matches!(
        img,
        DynamicImage::ImageLuma8(_)
            | DynamicImage::ImageLuma16(_)
            | DynamicImage::ImageLumaA8(_)
            | DynamicImage::ImageLumaA16(_)
    );
    let (channels, data): (usize, Vec<f32>) = if gray {
        (1, img.to_luma32f().into_raw())
    } else {
        (3, img.to_rgb32f().into_raw())
    };
    let data = data.into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
    Image::with_mask(grid, channels, data, vec![true; grid.len()]).map_err(|e| e.at(path))
}

fn to_u8(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Encodes an image as 8-bit PNG. Invalid pixels are already zero.
pub fn encode_image_png(img: &Image) -> Result<Vec<u8>> {
    let (w, h) = (img.width() as u32, img.height() as u32);
    let raw: Vec<u8> = img.data().iter().copied().map(to_u8).collect();
    let dynamic = match img.channels() {
        1 => DynamicImage::ImageLuma8(GrayImage::from_raw(w, h, raw).expect("buffer size")),
        _ => DynamicImage::ImageRgb8(RgbImage::from_raw(w, h, raw).expect("buffer size")),
    };
    let mut out = Vec::new();
    dynamic.write_to(&mut Cursor::new(&mut out), ImageFormat::Png)?;
    Ok(out)
}

pub fn write_image_png(path: impl AsRef<Path>, img: &Image) -> Result<()> {
    super::write_atomic(path.as_ref(), &encode_image_png(img)?)
}

/// Writes a boolean mask as an 8-bit PNG (255 = valid).
pub fn write_mask_png(path: impl AsRef<Path>, grid: PixelGrid, mask: &[bool]) -> Result<()> {
    if mask.len() != grid.len() {
        return Err(Error::InvalidParameter(format!(
            "mask has {} entries for a {}x{} grid",
            mask.len(),
            grid.width,
            grid.height
        )));
    }
    let raw = mask.iter().map(|&m| if m { 255 } else { 0 }).collect();
    let img = GrayImage::from_raw(grid.width as u32, grid.height as u32, raw).expect("buffer size");
    let mut out = Vec::new();
    img.write_to(&mut Cursor::new(&mut out), ImageFormat::Png)?;
    super::write_atomic(path.as_ref(), &out)
}

/// Reads a mask PNG; any nonzero luma is valid.
pub fn read_mask_png(path: impl AsRef<Path>) -> Result<(PixelGrid, Vec<bool>)> {
    let path = path.as_ref();
    let img = image::open(path)
        .map_err(|e| Error::from(e).at(path))?
        .to_luma8();
    let grid = PixelGrid::new(img.width() as usize, img.height() as usize);
    Ok((grid, img.into_raw().into_iter().map(|v| v != 0).collect()))
}
