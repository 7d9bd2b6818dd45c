//! Virtual ego-motion: flow induced by moving a pinhole camera through the
//! back-projected point cloud of a depth map, and the assembly of the three
//! tuples derived from each stereo pair.

use nalgebra::{Matrix3, Rotation3, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{backward_sample_scalar, compose_flows, FlowField, PixelGrid, ScalarField};
use crate::lateral::AugLabel;
use crate::tuple::{FlowStage, MotionParams, Provenance, SampleTuple, TupleKind};
use crate::unify::StereoPair;
use crate::warp::{forward_splat, visibility_mask};

/// Pinhole intrinsics in pixels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl CameraModel {
    /// Focal length `0.58 × width` on both axes, principal point at the
    /// image center.
    pub fn default_for(grid: PixelGrid) -> Self {
        let f = 0.58 * grid.width as f64;
        CameraModel {
            fx: f,
            fy: f,
            cx: (grid.width as f64 - 1.0) / 2.0,
            cy: (grid.height as f64 - 1.0) / 2.0,
        }
    }

    pub fn validate(&self, grid: PixelGrid) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0 && self.fx.is_finite() && self.fy.is_finite()) {
            return Err(Error::DegenerateCamera(format!(
                "focal lengths ({}, {})",
                self.fx, self.fy
            )));
        }
        let (w, h) = (grid.width as f64, grid.height as f64);
        let ok_x = self.cx >= -0.5 * w && self.cx <= 1.5 * w;
        let ok_y = self.cy >= -0.5 * h && self.cy <= 1.5 * h;
        if !(ok_x && ok_y) {
            return Err(Error::DegenerateCamera(format!(
                "principal point ({}, {}) too far outside {}x{}",
                self.cx, self.cy, grid.width, grid.height
            )));
        }
        Ok(())
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    #[inline]
    fn backproject(&self, x: f64, y: f64, z: f64) -> Vector3<f64> {
        Vector3::new((x - self.cx) / self.fx * z, (y - self.cy) / self.fy * z, z)
    }

    #[inline]
    fn project(&self, p: &Vector3<f64>) -> (f64, f64) {
        (self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy)
    }
}

/// Rigid camera transform `X' = R X + t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidMotion {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl RigidMotion {
    pub fn identity() -> Self {
        RigidMotion {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Rotation `Rz(yaw)·Ry(pitch)·Rx(roll)` followed by translation.
    pub fn from_euler(roll: f64, pitch: f64, yaw: f64, translation: [f64; 3]) -> Self {
        RigidMotion {
            rotation: Rotation3::from_euler_angles(roll, pitch, yaw).into_inner(),
            translation: Vector3::from(translation),
        }
    }

    pub fn from_params(p: &MotionParams) -> Self {
        Self::from_euler(p.euler[0], p.euler[1], p.euler[2], p.translation)
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        RigidMotion {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// Orthonormal with determinant +1, both within `1e-9`.
    pub fn is_proper(&self) -> bool {
        let e = self.rotation * self.rotation.transpose() - Matrix3::identity();
        e.amax() <= 1e-9 && (self.rotation.determinant() - 1.0).abs() <= 1e-9
    }

    #[inline]
    fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }
}

/// Per-axis sampling intervals for random ego-motion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MotionSamplingConfig {
    /// Roll, pitch, yaw intervals in radians.
    pub euler_range: [[f64; 2]; 3],
    /// Translation intervals, multiplied by the median valid depth.
    pub translation_range: [[f64; 2]; 3],
}

impl Default for MotionSamplingConfig {
    fn default() -> Self {
        MotionSamplingConfig {
            euler_range: [[-0.03, 0.03]; 3],
            translation_range: [[-0.02, 0.02]; 3],
        }
    }
}

impl MotionSamplingConfig {
    pub fn validate(&self) -> Result<()> {
        for [lo, hi] in self.euler_range.iter().chain(&self.translation_range) {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::InvalidParameter(format!(
                    "motion range [{lo}, {hi}] invalid"
                )));
            }
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, median_depth: f64, rng: &mut R) -> MotionParams {
        let mut draw = |[lo, hi]: [f64; 2]| {
            if hi > lo {
                rng.random_range(lo..=hi)
            } else {
                lo
            }
        };
        let euler = self.euler_range.map(&mut draw);
        let translation = self.translation_range.map(|r| draw(r) * median_depth);
        MotionParams { euler, translation }
    }
}

/// Flow and new-view depth induced by moving the camera.
#[derive(Clone, Debug)]
pub struct EgoFlow {
    pub flow: FlowField,
    /// Depth of each source point in the moved camera.
    pub depth: ScalarField,
}

/// Back-projects each valid pixel with its depth, applies `motion`, and
/// re-projects. Points landing at or behind the camera plane are invalid.
pub fn egomotion_flow_with_depth(
    depth: &ScalarField,
    cam: &CameraModel,
    motion: &RigidMotion,
) -> Result<EgoFlow> {
    let grid = depth.grid();
    cam.validate(grid)?;
    let mut candidates = 0usize;
    let mut new_depth = vec![0.0; grid.len()];
    let mut flow = FlowField::from_fn(grid, |x, y| {
        let z = depth.get(x as usize, y as usize).filter(|z| *z > 0.0)?;
        candidates += 1;
        let moved = motion.apply(&cam.backproject(x, y, z));
        if moved.z <= 0.0 {
            return None;
        }
        new_depth[grid.index(x as usize, y as usize)] = moved.z;
        let (px, py) = cam.project(&moved);
        Some((px - x, py - y))
    });
    if candidates == 0 {
        return Err(Error::InvalidParameter(
            "depth has no valid positive pixels".into(),
        ));
    }
    flow.enforce_sanity_bound();
    if flow.valid_count() == 0 {
        return Err(Error::BehindCamera);
    }
    let depth = ScalarField::new(grid, new_depth, flow.valid().to_vec())?;
    Ok(EgoFlow { flow, depth })
}

/// Flow induced by moving the camera by `motion`.
pub fn egomotion_flow(
    depth: &ScalarField,
    cam: &CameraModel,
    motion: &RigidMotion,
) -> Result<FlowField> {
    egomotion_flow_with_depth(depth, cam, motion).map(|e| e.flow)
}

/// Extends a stereo pair with a synthesized third view.
///
/// Returns `[(I0, I1, F01), (I1, I2, F12), (I0, I2, F02)]`; every flow is
/// masked to pixels visible in its target view.
pub fn synth_general_tuples<R: Rng + ?Sized>(
    pair: &StereoPair,
    sample_id: &str,
    cam: &CameraModel,
    cfg: &MotionSamplingConfig,
    rng: &mut R,
) -> Result<Vec<SampleTuple>> {
    cfg.validate()?;
    let median = pair
        .depth1
        .median()
        .ok_or_else(|| Error::InvalidParameter("second view has no valid depth".into()))?;
    let params = cfg.sample(median, rng);
    synth_general_tuples_with_motion(pair, sample_id, cam, &params)
}

/// [`synth_general_tuples`] with a fixed motion.
pub fn synth_general_tuples_with_motion(
    pair: &StereoPair,
    sample_id: &str,
    cam: &CameraModel,
    params: &MotionParams,
) -> Result<Vec<SampleTuple>> {
    let motion = RigidMotion::from_params(params);
    let depth1 = pair.depth1.clone();
    let ego = egomotion_flow_with_depth(&depth1, cam, &motion)?;
    let flow12 = ego.flow.masked(pair.view1.valid());
    let view2 = forward_splat(&pair.view1, &ego.depth, &flow12)?;
    let visible12 = visibility_mask(&flow12, &ego.depth, &view2.depth)?;

    let flow02 = compose_flows(&pair.flow01, &flow12)?;
    let point_depth02 = backward_sample_scalar(&pair.flow01, &ego.depth)?;
    let visible02 = visibility_mask(&flow02, &point_depth02, &view2.depth)?;

    let base = pair.to_tuple(sample_id);
    let provenance = |stage| Provenance {
        sample_id: sample_id.to_owned(),
        kind: TupleKind::new(pair.modality, stage),
        bf: (stage == FlowStage::F02).then_some(pair.bf),
        side_sign: (stage == FlowStage::F02).then_some(pair.sign.as_i8()),
        motion: Some(*params),
        augmentation: None,
    };
    let t12 = SampleTuple {
        source: pair.view1.clone(),
        target: view2.image.clone(),
        flow: flow12.masked(&visible12),
        label: AugLabel::None,
        provenance: provenance(FlowStage::F12),
    };
    let t02 = SampleTuple {
        source: pair.view0.clone(),
        target: view2.image,
        flow: flow02.masked(&visible02),
        label: AugLabel::None,
        provenance: provenance(FlowStage::F02),
    };
    Ok(vec![base, t12, t02])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lateral::rotation_flow;
    use crate::unify::Sign;

    fn grid() -> PixelGrid {
        PixelGrid::new(32, 24)
    }

    #[test]
    fn identity_motion_is_zero_flow() {
        let depth =
            ScalarField::from_fn(grid(), |x, y| Some(2.0 + 0.1 * x as f64 + 0.05 * y as f64));
        let flow = egomotion_flow(
            &depth,
            &CameraModel::default_for(grid()),
            &RigidMotion::identity(),
        )
        .unwrap();
        assert_eq!(flow.valid_count(), grid().len());
        assert!(flow.max_abs() < 1e-6);
    }

    #[test]
    fn pure_translation_on_plane() {
        let cam = CameraModel {
            fx: 100.0,
            fy: 100.0,
            cx: 15.5,
            cy: 11.5,
        };
        let depth = ScalarField::constant(grid(), 50.0);
        let motion = RigidMotion::from_euler(0.0, 0.0, 0.0, [0.5, 0.0, 0.0]);
        let flow = egomotion_flow(&depth, &cam, &motion).unwrap();
        for i in 0..grid().len() {
            let (u, v) = flow.get_index(i).unwrap();
            assert!((u - 1.0).abs() < 1e-9 && v.abs() < 1e-12);
        }
    }

    #[test]
    fn optical_axis_rotation_matches_in_plane_rotation() {
        let g = grid();
        let cam = CameraModel::default_for(g);
        let theta = 0.2;
        let depth = ScalarField::from_fn(g, |x, y| Some(3.0 + ((x * y) % 7) as f64));
        let flow = egomotion_flow(
            &depth,
            &cam,
            &RigidMotion::from_euler(0.0, 0.0, theta, [0.0; 3]),
        )
        .unwrap();
        let (reference, _) = rotation_flow(g, theta, Sign::Plus, (cam.cx, cam.cy));
        for i in 0..g.len() {
            let (u, v) = flow.get_index(i).unwrap();
            let (ru, rv) = reference.get_index(i).unwrap();
            assert!((u - ru).abs() < 1e-4 && (v - rv).abs() < 1e-4);
        }
    }

    #[test]
    fn scene_behind_camera_is_an_error() {
        let depth = ScalarField::constant(grid(), 1.0);
        let motion = RigidMotion::from_euler(0.0, 0.0, 0.0, [0.0, 0.0, -2.0]);
        let err = egomotion_flow(&depth, &CameraModel::default_for(grid()), &motion).unwrap_err();
        assert!(matches!(err, Error::BehindCamera));
    }

    #[test]
    fn degenerate_camera_is_rejected() {
        let depth = ScalarField::constant(grid(), 1.0);
        let mut cam = CameraModel::default_for(grid());
        cam.fx = 0.0;
        assert!(matches!(
            egomotion_flow(&depth, &cam, &RigidMotion::identity()),
            Err(Error::DegenerateCamera(_))
        ));
        let cam = CameraModel {
            cx: 100.0,
            ..CameraModel::default_for(grid())
        };
        assert!(egomotion_flow(&depth, &cam, &RigidMotion::identity()).is_err());
    }

    #[test]
    fn sampled_motions_are_proper_rotations() {
        let cfg = MotionSamplingConfig::default();
        let mut rng = crate::rng::stream(9, "m", "motion");
        for _ in 0..100 {
            let p = cfg.sample(10.0, &mut rng);
            assert!(p.euler.iter().all(|a| a.abs() <= 0.03));
            assert!(p.translation.iter().all(|t| t.abs() <= 0.2 + 1e-12));
            let m = RigidMotion::from_params(&p);
            assert!(m.is_proper());
            assert!(m.inverse().is_proper());
        }
    }

    #[test]
    fn vertical_translation_yields_vertical_flow() {
        let depth = ScalarField::constant(grid(), 5.0);
        let motion = RigidMotion::from_euler(0.0, 0.0, 0.0, [0.0, 0.01, 0.0]);
        let flow = egomotion_flow(&depth, &CameraModel::default_for(grid()), &motion).unwrap();
        assert!(flow.v().iter().any(|v| v.abs() > 0.0));
        let motion = RigidMotion::from_euler(0.01, 0.0, 0.0, [0.0; 3]);
        let flow = egomotion_flow(&depth, &CameraModel::default_for(grid()), &motion).unwrap();
        assert!(flow.v().iter().any(|v| v.abs() > 0.0));
    }
}
