//! Generation config, read from TOML. Unknown keys are rejected.
//!
//! ```toml
//! global_seed = 7
//! output_format = "flo"          # or "kitti-png"
//!
//! [counts]
//! mono_f01 = 1
//! stereo_f02 = 2
//!
//! [virtual_stereo]
//! bf_range = { relative = [0.02, 0.3] }
//! side = "random"
//!
//! [motion]
//! euler_range = [[-0.03, 0.03], [-0.03, 0.03], [-0.03, 0.03]]
//!
//! [lateral]
//! sides = ["source", "target"]
//! probability = { flip = 0.2, rotate = 0.2, shear = 0.1 }
//! ranges = { theta_degrees = [5.0, 25.0] }
//! ```

use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::egomotion::MotionSamplingConfig;
use crate::error::{Error, Result};
use crate::io::FlowFormat;
use crate::lateral::{AugLabel, AugRanges, Side};
use crate::tuple::{FlowStage, Modality, TupleKind};
use crate::unify::VirtualStereoConfig;

/// Tuples emitted per manifest entry for each kind.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KindCounts {
    pub mono_f01: u32,
    pub mono_f12: u32,
    pub mono_f02: u32,
    pub stereo_f01: u32,
    pub stereo_f12: u32,
    pub stereo_f02: u32,
}

impl Default for KindCounts {
    fn default() -> Self {
        KindCounts {
            mono_f01: 1,
            mono_f12: 1,
            mono_f02: 1,
            stereo_f01: 1,
            stereo_f12: 1,
            stereo_f02: 1,
        }
    }
}

impl KindCounts {
    pub fn get(&self, kind: TupleKind) -> u32 {
        match (kind.modality, kind.stage) {
            (Modality::Mono, FlowStage::F01) => self.mono_f01,
            (Modality::Mono, FlowStage::F12) => self.mono_f12,
            (Modality::Mono, FlowStage::F02) => self.mono_f02,
            (Modality::Stereo, FlowStage::F01) => self.stereo_f01,
            (Modality::Stereo, FlowStage::F12) => self.stereo_f12,
            (Modality::Stereo, FlowStage::F02) => self.stereo_f02,
        }
    }

    /// Number of base pairs needed for one entry of `modality`.
    pub fn pairs_for(&self, modality: Modality) -> u32 {
        [FlowStage::F01, FlowStage::F12, FlowStage::F02]
            .into_iter()
            .map(|s| self.get(TupleKind::new(modality, s)))
            .max()
            .unwrap_or(0)
    }
}

/// Probability that a tuple receives an augmentation of each class. The
/// remaining mass leaves the tuple unaugmented.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassProbabilities {
    pub flip: f64,
    pub rotate: f64,
    pub shear: f64,
}

impl Default for ClassProbabilities {
    fn default() -> Self {
        ClassProbabilities {
            flip: 0.5 / 3.0,
            rotate: 0.5 / 3.0,
            shear: 0.5 / 3.0,
        }
    }
}

impl ClassProbabilities {
    pub fn total(&self) -> f64 {
        self.flip + self.rotate + self.shear
    }

    /// Draws a class, or `None` for no augmentation.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<AugLabel> {
        let r: f64 = rng.random();
        let mut acc = 0.0;
        for (label, p) in [
            (AugLabel::Flip, self.flip),
            (AugLabel::Rotate, self.rotate),
            (AugLabel::Shear, self.shear),
        ] {
            acc += p;
            if r < acc {
                return Some(label);
            }
        }
        None
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LateralConfig {
    pub probability: ClassProbabilities,
    pub ranges: AugRanges,
    /// Sides eligible for augmentation; one is picked uniformly per tuple.
    pub sides: Vec<Side>,
}

impl Default for LateralConfig {
    fn default() -> Self {
        LateralConfig {
            probability: ClassProbabilities::default(),
            ranges: AugRanges::default(),
            sides: vec![Side::Source, Side::Target],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenConfig {
    pub global_seed: u64,
    pub counts: KindCounts,
    pub virtual_stereo: VirtualStereoConfig,
    pub motion: MotionSamplingConfig,
    pub lateral: LateralConfig,
    pub output_format: FlowFormat,
    /// Used when no output directory is given on the command line.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            global_seed: 0,
            counts: KindCounts::default(),
            virtual_stereo: VirtualStereoConfig::default(),
            motion: MotionSamplingConfig::default(),
            lateral: LateralConfig::default(),
            output_format: FlowFormat::Flo,
            output_dir: None,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        let wrap = |e: Error| Error::Config(e.to_string());
        self.virtual_stereo.validate().map_err(wrap)?;
        self.motion.validate().map_err(wrap)?;
        self.lateral.ranges.validate().map_err(wrap)?;
        let p = &self.lateral.probability;
        for (name, v) in [("flip", p.flip), ("rotate", p.rotate), ("shear", p.shear)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!(
                    "probability.{name} = {v} outside [0, 1]"
                )));
            }
        }
        if p.total() > 1.0 + 1e-9 {
            return Err(Error::Config(format!(
                "class probabilities sum to {} > 1",
                p.total()
            )));
        }
        if p.total() > 0.0 && self.lateral.sides.is_empty() {
            return Err(Error::Config(
                "lateral.sides is empty but augmentation is enabled".into(),
            ));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: GenConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).at(path))?;
        Self::from_toml(&text).map_err(|e| e.at(path))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}
