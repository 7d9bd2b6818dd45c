//! File codecs: Middlebury `.flo`, KITTI 16-bit flow PNG, depth PNG, PFM,
//! 8-bit images and masks, and flow visualization.

mod depth;
mod flo;
mod image;
mod kitti;
mod visualize;

use std::fs;
use std::path::Path;

pub use self::depth::{
    decode_pfm, encode_pfm, read_depth_png, read_pfm, write_depth_png, write_pfm,
};
pub use self::flo::{decode_flo, encode_flo, read_flo, write_flo, FLO_INVALID, FLO_MAGIC};
pub use self::image::{
    encode_image_png, read_image, read_mask_png, write_image_png, write_mask_png,
};
pub use self::kitti::{decode_kitti_png, encode_kitti_png, read_kitti_png, write_kitti_png};
pub use self::visualize::{visualize_flow, wheel_position, write_flow_png};

use crate::error::{Error, Result};
use crate::fields::FlowField;

/// Writes `bytes` to a sibling temp file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidParameter(format!("not a file path: {}", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, bytes).map_err(|e| Error::from(e).at(&tmp))?;
    fs::rename(&tmp, path).map_err(|e| Error::from(e).at(path))?;
    Ok(())
}

/// Flow container formats.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlowFormat {
    Flo,
    KittiPng,
}

impl FlowFormat {
    pub fn extension(self) -> &'static str {
        match self {
            FlowFormat::Flo => "flo",
            FlowFormat::KittiPng => "png",
        }
    }

    /// Guesses the format from a file extension.
    pub fn from_path(path: &Path) -> Result<Self> {
        match path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .as_deref()
        {
            Some("flo") => Ok(FlowFormat::Flo),
            Some("png") => Ok(FlowFormat::KittiPng),
            _ => Err(Error::InvalidParameter(format!(
                "cannot infer flow format of {}",
                path.display()
            ))),
        }
    }

    pub fn encode(self, flow: &FlowField) -> Result<Vec<u8>> {
        match self {
            FlowFormat::Flo => encode_flo(flow),
            FlowFormat::KittiPng => encode_kitti_png(flow),
        }
    }

    pub fn decode(self, bytes: &[u8]) -> Result<FlowField> {
        match self {
            FlowFormat::Flo => decode_flo(bytes),
            FlowFormat::KittiPng => decode_kitti_png(bytes),
        }
    }
}

/// Reads a flow file, picking the codec by extension.
pub fn read_flow(path: &Path) -> Result<FlowField> {
    let format = FlowFormat::from_path(path)?;
    let bytes = fs::read(path).map_err(|e| Error::from(e).at(path))?;
    format.decode(&bytes).map_err(|e| e.at(path))
}
