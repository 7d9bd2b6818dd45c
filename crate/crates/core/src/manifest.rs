//! Dataset manifests: one JSON object per line.
//!
//! ```text
//! {"sample_id": "room_01", "modality": "mono", "image": "room_01.png", "depth": "room_01_depth.png", "depth_scale": 1000}
//! {"sample_id": "street_07", "modality": "stereo", "left": "l.png", "right": "r.png", "disparity": "d.png", "depth_scale": 256}
//! ```
//!
//! Relative paths resolve against the manifest's directory. Depth and
//! disparity files are 16-bit PNG (stored value divided by `depth_scale`) or
//! PFM (value divided by `depth_scale`). Blank lines and lines starting with
//! `#` are ignored.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::egomotion::CameraModel;
use crate::error::{Error, Result};
use crate::fields::{Image, ScalarField};
use crate::io;
use crate::tuple::Modality;

#[derive(Clone, Debug, PartialEq)]
pub enum EntrySource {
    Mono {
        image: PathBuf,
        depth: PathBuf,
    },
    Stereo {
        left: PathBuf,
        right: PathBuf,
        disparity: PathBuf,
        /// Overrides the configured disparity-to-flow sign.
        disparity_sign: Option<i8>,
        /// Overrides the configured baseline-focal product.
        bf: Option<f64>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ManifestEntry {
    pub sample_id: String,
    pub source: EntrySource,
    pub depth_scale: f64,
    pub intrinsics: Option<CameraModel>,
}

/// On-disk form of one line.
#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntry {
    sample_id: String,
    modality: Modality,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    image: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    depth: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    left: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    right: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    disparity: Option<PathBuf>,
    #[serde(default = "unit_scale")]
    depth_scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    intrinsics: Option<CameraModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    disparity_sign: Option<i8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bf: Option<f64>,
}

impl RawEntry {
    fn into_entry(self) -> std::result::Result<ManifestEntry, String> {
        let need = |v: Option<PathBuf>, key: &str| v.ok_or_else(|| format!("missing key {key:?}"));
        let forbid = |present: bool, key: &str| {
            if present {
                Err(format!(
                    "key {key:?} does not apply to {:?} entries",
                    self.modality
                ))
            } else {
                Ok(())
            }
        };
        let source = match self.modality {
            Modality::Mono => {
                forbid(self.left.is_some(), "left")?;
                forbid(self.right.is_some(), "right")?;
                forbid(self.disparity.is_some(), "disparity")?;
                forbid(self.disparity_sign.is_some(), "disparity_sign")?;
                forbid(self.bf.is_some(), "bf")?;
                EntrySource::Mono {
                    image: need(self.image, "image")?,
                    depth: need(self.depth, "depth")?,
                }
            }
            Modality::Stereo => {
                forbid(self.image.is_some(), "image")?;
                forbid(self.depth.is_some(), "depth")?;
                EntrySource::Stereo {
                    left: need(self.left, "left")?,
                    right: need(self.right, "right")?,
                    disparity: need(self.disparity, "disparity")?,
                    disparity_sign: self.disparity_sign,
                    bf: self.bf,
                }
            }
        };
        Ok(ManifestEntry {
            sample_id: self.sample_id,
            source,
            depth_scale: self.depth_scale,
            intrinsics: self.intrinsics,
        })
    }

    fn from_entry(e: &ManifestEntry) -> Self {
        let mut raw = RawEntry {
            sample_id: e.sample_id.clone(),
            modality: e.modality(),
            depth_scale: e.depth_scale,
            intrinsics: e.intrinsics,
            ..RawEntry::default()
        };
        match &e.source {
            EntrySource::Mono { image, depth } => {
                raw.image = Some(image.clone());
                raw.depth = Some(depth.clone());
            }
            EntrySource::Stereo {
                left,
                right,
                disparity,
                disparity_sign,
                bf,
            } => {
                raw.left = Some(left.clone());
                raw.right = Some(right.clone());
                raw.disparity = Some(disparity.clone());
                raw.disparity_sign = *disparity_sign;
                raw.bf = *bf;
            }
        }
        raw
    }
}

fn unit_scale() -> f64 {
    1.0
}

impl ManifestEntry {
    pub fn modality(&self) -> Modality {
        match self.source {
            EntrySource::Mono { .. } => Modality::Mono,
            EntrySource::Stereo { .. } => Modality::Stereo,
        }
    }

    /// Every file the entry references.
    pub fn paths(&self) -> Vec<&Path> {
        match &self.source {
            EntrySource::Mono { image, depth } => vec![image, depth],
            EntrySource::Stereo {
                left,
                right,
                disparity,
                ..
            } => vec![left, right, disparity],
        }
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match &mut self.source {
            EntrySource::Mono { image, depth } => {
                fix(image);
                fix(depth);
            }
            EntrySource::Stereo {
                left,
                right,
                disparity,
                ..
            } => {
                fix(left);
                fix(right);
                fix(disparity);
            }
        }
    }

    /// First referenced file that does not exist.
    pub fn missing_file(&self) -> Option<&Path> {
        self.paths().into_iter().find(|p| !p.is_file())
    }
}

/// Reads a depth or disparity map, dividing by `scale`.
pub fn read_scalar_map(path: &Path, scale: f64) -> Result<ScalarField> {
    let is_pfm = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("pfm"));
    if !is_pfm {
        return io::read_depth_png(path, scale);
    }
    let raw = io::read_pfm(path)?;
    Ok(ScalarField::from_fn(raw.grid(), |x, y| {
        raw.get(x, y).map(|v| v / scale)
    }))
}

/// Loaded pixel data for one entry.
#[derive(Clone, Debug)]
pub enum LoadedEntry {
    Mono {
        image: Image,
        depth: ScalarField,
    },
    Stereo {
        left: Image,
        right: Image,
        disparity: ScalarField,
    },
}

impl ManifestEntry {
    pub fn load(&self) -> Result<LoadedEntry> {
        match &self.source {
            EntrySource::Mono { image, depth } => Ok(LoadedEntry::Mono {
                image: io::read_image(image)?,
                depth: read_scalar_map(depth, self.depth_scale)?,
            }),
            EntrySource::Stereo {
                left,
                right,
                disparity,
                ..
            } => Ok(LoadedEntry::Stereo {
                left: io::read_image(left)?,
                right: io::read_image(right)?,
                disparity: read_scalar_map(disparity, self.depth_scale)?,
            }),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
}

fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && id != "."
        && id != ".."
        && !id.starts_with('.')
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c))
}

impl DatasetManifest {
    /// Parses manifest text; relative paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut entries = Vec::new();
        let mut seen = BTreeSet::new();
        for (n, line) in text.lines().enumerate() {
            let line_no = n + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let bad = |message: String| Error::Manifest {
                line: line_no,
                message,
            };
            let raw: RawEntry = serde_json::from_str(trimmed).map_err(|e| bad(e.to_string()))?;
            let mut entry = raw.into_entry().map_err(bad)?;
            if !valid_id(&entry.sample_id) {
                return Err(bad(format!(
                    "sample_id {:?} must be non-empty ASCII letters, digits, '-', '_' or '.'",
                    entry.sample_id
                )));
            }
            if !seen.insert(entry.sample_id.clone()) {
                return Err(bad(format!("duplicate sample_id {:?}", entry.sample_id)));
            }
            if !(entry.depth_scale.is_finite() && entry.depth_scale > 0.0) {
                return Err(bad(format!(
                    "depth_scale must be positive, got {}",
                    entry.depth_scale
                )));
            }
            if let EntrySource::Stereo {
                disparity_sign, bf, ..
            } = &entry.source
            {
                if let Some(s) = disparity_sign {
                    if *s != 1 && *s != -1 {
                        return Err(bad(format!("disparity_sign must be 1 or -1, got {s}")));
                    }
                }
                if let Some(bf) = bf {
                    if !(bf.is_finite() && *bf > 0.0) {
                        return Err(bad(format!("bf must be positive, got {bf}")));
                    }
                }
            }
            entry.resolve(base);
            entries.push(entry);
        }
        Ok(DatasetManifest { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).at(path))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base).map_err(|e| e.at(path))
    }

    /// Serializes entries one per line, with paths as stored.
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&serde_json::to_string(&RawEntry::from_entry(e))?);
            out.push('\n');
        }
        Ok(out)
    }
}
