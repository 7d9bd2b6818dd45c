//! Training tuples `(source, target, flow)` and their provenance.

use serde::{Deserialize, Serialize};

use crate::fields::FlowField;
use crate::fields::Image;
use crate::lateral::{AugLabel, AugSpec, Side};
use crate::warp::backward_warp_image;

#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    #[default]
    Mono,
    Stereo,
}

/// Which flow of the general flow generation a tuple carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowStage {
    /// Horizontal flow between the two views of a (virtual) stereo pair.
    F01,
    /// Ego-motion flow from view 1 to the synthesized view 2.
    F12,
    /// Composed flow from view 0 to the synthesized view 2.
    F02,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TupleKind {
    pub modality: Modality,
    pub stage: FlowStage,
}

impl TupleKind {
    pub const ALL: [TupleKind; 6] = [
        TupleKind::new(Modality::Mono, FlowStage::F01),
        TupleKind::new(Modality::Mono, FlowStage::F12),
        TupleKind::new(Modality::Mono, FlowStage::F02),
        TupleKind::new(Modality::Stereo, FlowStage::F01),
        TupleKind::new(Modality::Stereo, FlowStage::F12),
        TupleKind::new(Modality::Stereo, FlowStage::F02),
    ];

    pub const fn new(modality: Modality, stage: FlowStage) -> Self {
        TupleKind { modality, stage }
    }

    /// Short name such as `mono_f02`.
    pub fn name(&self) -> String {
        let m = match self.modality {
            Modality::Mono => "mono",
            Modality::Stereo => "stereo",
        };
        let s = match self.stage {
            FlowStage::F01 => "f01",
            FlowStage::F12 => "f12",
            FlowStage::F02 => "f02",
        };
        format!("{m}_{s}")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotionParams {
    /// Roll, pitch, yaw in radians.
    pub euler: [f64; 3],
    pub translation: [f64; 3],
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugRecord {
    pub spec: AugSpec,
    pub side: Side,
}

/// Where a tuple came from and which random draws produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub sample_id: String,
    pub kind: TupleKind,
    /// Baseline-focal product used for the stereo stage.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bf: Option<f64>,
    /// Sign applied to the disparity to obtain the horizontal flow.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub side_sign: Option<i8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub motion: Option<MotionParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub augmentation: Option<AugRecord>,
}

/// One training sample. The validity mask of `flow` is the ground-truth mask:
/// only pixels whose correspondence is visible in `target` are valid.
#[derive(Clone, Debug)]
pub struct SampleTuple {
    pub source: Image,
    pub target: Image,
    pub flow: FlowField,
    pub label: AugLabel,
    pub provenance: Provenance,
}

impl SampleTuple {
    pub fn mask(&self) -> &[bool] {
        self.flow.valid()
    }

    pub fn coverage(&self) -> f64 {
        self.flow.coverage()
    }

    /// Mean absolute difference between `source` and `target` warped back by
    /// the ground-truth flow, over pixels where both are defined.
    pub fn photometric_error(&self) -> Option<f64> {
        let warped = backward_warp_image(&self.flow, &self.target).ok()?;
        let c = self.source.channels();
        let mut sum = 0.0;
        let mut n = 0usize;
        for i in 0..self.flow.grid().len() {
            if warped.valid()[i] && self.source.valid()[i] {
                for k in 0..c {
                    sum += (warped.data()[i * c + k] - self.source.data()[i * c + k]).abs() as f64;
                }
                n += c;
            }
        }
        (n > 0).then(|| sum / n as f64)
    }
}
