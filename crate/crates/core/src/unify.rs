//! Turning monocular depth and stereo disparity into horizontal-flow pairs.
//!
//! Monocular samples get a virtual disparity `d = Bf / Z` with a randomly
//! drawn baseline-focal product and are splatted into a second view. Stereo
//! samples already carry disparity; it becomes flow directly and the depth
//! of the second view is obtained by splatting.

use log::debug;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{FlowField, Image, ScalarField};
use crate::lateral::AugLabel;
use crate::tuple::{FlowStage, Modality, Provenance, SampleTuple, TupleKind};
use crate::warp::{forward_splat, forward_splat_depth, visibility_mask};

/// A displacement direction, `+1` or `-1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }

    pub fn from_i8(v: i8) -> Result<Sign> {
        match v {
            1 => Ok(Sign::Plus),
            -1 => Ok(Sign::Minus),
            other => Err(Error::InvalidParameter(format!(
                "sign must be +1 or -1, got {other}"
            ))),
        }
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Sign {
        if rng.random_bool(0.5) {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }
}

/// Interval the virtual baseline-focal product `s_c` is drawn from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BfRange {
    /// `[lo, hi] × image width × minimum valid depth`, so the largest virtual
    /// disparity falls in `[lo, hi] × width`.
    Relative([f64; 2]),
    /// Fixed interval in pixel·depth units.
    Absolute([f64; 2]),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SidePolicy {
    Random,
    Plus,
    Minus,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VirtualStereoConfig {
    pub bf_range: BfRange,
    pub side: SidePolicy,
    /// Upper bound on the largest virtual disparity, as a fraction of width.
    pub max_disparity_fraction: f64,
    /// Baseline-focal product used to turn stereo disparity into depth.
    pub bf_stereo_constant: f64,
    /// Sign mapping stereo disparity to the flow from image 0 to image 1.
    pub stereo_flow_sign: i8,
}

impl Default for VirtualStereoConfig {
    fn default() -> Self {
        VirtualStereoConfig {
            bf_range: BfRange::Relative([0.02, 0.3]),
            side: SidePolicy::Random,
            max_disparity_fraction: 0.3,
            bf_stereo_constant: 100.0,
            stereo_flow_sign: -1,
        }
    }
}

impl VirtualStereoConfig {
    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = match self.bf_range {
            BfRange::Relative(r) | BfRange::Absolute(r) => r,
        };
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "bf range [{lo}, {hi}] must satisfy 0 < lo <= hi"
            )));
        }
        if !(self.max_disparity_fraction > 0.0 && self.max_disparity_fraction.is_finite()) {
            return Err(Error::InvalidParameter(
                "max_disparity_fraction must be positive".into(),
            ));
        }
        if !(self.bf_stereo_constant > 0.0 && self.bf_stereo_constant.is_finite()) {
            return Err(Error::InvalidParameter(
                "bf_stereo_constant must be positive".into(),
            ));
        }
        Sign::from_i8(self.stereo_flow_sign)?;
        Ok(())
    }
}

/// A two-view pair with horizontal ground-truth flow and per-view depth.
#[derive(Clone, Debug)]
pub struct StereoPair {
    pub modality: Modality,
    pub view0: Image,
    pub view1: Image,
    /// Flow from view 0 to view 1, masked to pixels visible in view 1.
    pub flow01: FlowField,
    pub depth0: ScalarField,
    /// Depth of view 1, splatted from `depth0`; holes are invalid.
    pub depth1: ScalarField,
    pub bf: f64,
    pub sign: Sign,
    /// True when the drawn `bf` was clamped to respect the disparity limit.
    pub clamped: bool,
}

impl StereoPair {
    pub fn to_tuple(&self, sample_id: &str) -> SampleTuple {
        SampleTuple {
            source: self.view0.clone(),
            target: self.view1.clone(),
            flow: self.flow01.clone(),
            label: AugLabel::None,
            provenance: Provenance {
                sample_id: sample_id.to_owned(),
                kind: TupleKind::new(self.modality, FlowStage::F01),
                bf: Some(self.bf),
                side_sign: Some(self.sign.as_i8()),
                motion: None,
                augmentation: None,
            },
        }
    }
}

fn check_bf(bf: f64) -> Result<()> {
    if bf > 0.0 && bf.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "baseline-focal product must be positive, got {bf}"
        )))
    }
}

/// Reciprocal map `bf / value`; non-positive inputs become invalid.
fn reciprocal(field: &ScalarField, bf: f64, what: &str) -> Result<ScalarField> {
    check_bf(bf)?;
    let mut dropped = 0usize;
    let out = ScalarField::from_fn(field.grid(), |x, y| {
        let v = field.get(x, y)?;
        if v > 0.0 {
            Some(bf / v)
        } else {
            dropped += 1;
            None
        }
    });
    if dropped > 0 {
        debug!("{what}: {dropped} non-positive pixels marked invalid");
    }
    Ok(out)
}

/// `d = bf / Z`.
pub fn depth_to_disparity(depth: &ScalarField, bf: f64) -> Result<ScalarField> {
    reciprocal(depth, bf, "depth_to_disparity")
}

/// `Z = bf / d`.
pub fn disparity_to_depth(disp: &ScalarField, bf: f64) -> Result<ScalarField> {
    reciprocal(disp, bf, "disparity_to_depth")
}

/// Horizontal flow `(sign · d, 0)`.
pub fn disparity_to_flow(disp: &ScalarField, sign: Sign) -> FlowField {
    let s = sign.value();
    let grid = disp.grid();
    FlowField::from_fn(grid, |x, y| {
        disp.get(x as usize, y as usize).map(|d| (s * d, 0.0))
    })
}

/// Builds a virtual stereo pair from a monocular image and its depth.
///
/// Draws `bf` then the side sign from `rng`, splats the image by the signed
/// disparity flow, and returns that flow as ground truth together with the
/// splatted depth of the new view.
pub fn synth_virtual_stereo<R: Rng + ?Sized>(
    image: &Image,
    depth: &ScalarField,
    cfg: &VirtualStereoConfig,
    rng: &mut R,
) -> Result<StereoPair> {
    cfg.validate()?;
    image.grid().ensure_same(&depth.grid())?;
    let zmin = depth
        .valid_values()
        .filter(|z| *z > 0.0)
        .fold(f64::INFINITY, f64::min);
    if !zmin.is_finite() {
        return Err(Error::EmptyWarp);
    }
    let width = depth.grid().width as f64;
    let [lo, hi] = match cfg.bf_range {
        BfRange::Relative([a, b]) => [a * width * zmin, b * width * zmin],
        BfRange::Absolute(r) => r,
    };
    let mut bf = if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    };
    let cap = cfg.max_disparity_fraction * width * zmin;
    let clamped = bf > cap;
    if clamped {
        debug!("virtual bf {bf:.4} clamped to {cap:.4}");
        bf = cap;
    }
    let sign = match cfg.side {
        SidePolicy::Random => Sign::random(rng),
        SidePolicy::Plus => Sign::Plus,
        SidePolicy::Minus => Sign::Minus,
    };

    let disp = depth_to_disparity(depth, bf)?;
    let flow = disparity_to_flow(&disp, sign);
    let splat = forward_splat(image, depth, &flow)?;
    let visible = visibility_mask(&flow, depth, &splat.depth)?;
    Ok(StereoPair {
        modality: Modality::Mono,
        view0: image.clone(),
        view1: splat.image,
        flow01: flow.masked(&visible),
        depth0: depth.clone(),
        depth1: splat.depth,
        bf,
        sign,
        clamped,
    })
}

/// Wraps a rectified stereo pair with ground-truth disparity of the first
/// image. The flow is `sign · d`; depths follow from `bf`.
pub fn ingest_stereo(
    left: &Image,
    right: &Image,
    disp: &ScalarField,
    bf: f64,
    sign: Sign,
) -> Result<StereoPair> {
    check_bf(bf)?;
    left.grid().ensure_same(&disp.grid())?;
    right.grid().ensure_same(&disp.grid())?;
    if left.channels() != right.channels() {
        return Err(Error::InvalidParameter(
            "stereo images differ in channel count".into(),
        ));
    }
    let depth0 = disparity_to_depth(disp, bf)?;
    if depth0.valid_count() == 0 {
        return Err(Error::InvalidParameter(
            "degenerate disparity: no positive values".into(),
        ));
    }
    let flow = disparity_to_flow(disp, sign).masked(depth0.valid());
    let depth1 = forward_splat_depth(&depth0, &flow)?;
    let visible = visibility_mask(&flow, &depth0, &depth1)?;
    Ok(StereoPair {
        modality: Modality::Stereo,
        view0: left.clone(),
        view1: right.clone(),
        flow01: flow.masked(&visible),
        depth0,
        depth1,
        bf,
        sign,
        clamped: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::PixelGrid;
    use crate::rng;

    fn g() -> PixelGrid {
        PixelGrid::new(16, 16)
    }

    fn stripes(grid: PixelGrid) -> Image {
        Image::from_fn(grid, 1, |x, y, _| ((x * 3 + y) % 11) as f32 / 10.0)
    }

    #[test]
    fn reciprocal_examples() {
        let grid = PixelGrid::new(3, 1);
        let depth = ScalarField::new(grid, vec![2.0, 25.0, 0.0], vec![true; 3]).unwrap();
        let d1 = depth_to_disparity(&depth, 1.0).unwrap();
        assert_eq!(d1.get(0, 0), Some(0.5));
        assert_eq!(d1.get(2, 0), None);
        let d50 = depth_to_disparity(&depth, 50.0).unwrap();
        assert_eq!(d50.get(1, 0), Some(2.0));
        assert!(depth_to_disparity(&depth, 0.0).is_err());
        assert!(depth_to_disparity(&depth, -1.0).is_err());

        let disp = ScalarField::new(grid, vec![0.5, 4.0, 0.0], vec![true; 3]).unwrap();
        let z = disparity_to_depth(&disp, 1.0).unwrap();
        assert_eq!(z.get(0, 0), Some(2.0));
        assert_eq!(z.get(2, 0), None);
        assert_eq!(
            disparity_to_depth(&disp, 100.0).unwrap().get(1, 0),
            Some(25.0)
        );
    }

    #[test]
    fn disparity_flow_sign_and_mask() {
        let grid = PixelGrid::new(2, 1);
        let disp = ScalarField::new(grid, vec![3.0, 3.0], vec![true, false]).unwrap();
        assert_eq!(
            disparity_to_flow(&disp, Sign::Plus).get(0, 0),
            Some((3.0, 0.0))
        );
        assert_eq!(
            disparity_to_flow(&disp, Sign::Minus).get(0, 0),
            Some((-3.0, 0.0))
        );
        assert_eq!(disparity_to_flow(&disp, Sign::Plus).get(1, 0), None);
    }

    fn fixed_cfg(bf: f64, side: SidePolicy) -> VirtualStereoConfig {
        VirtualStereoConfig {
            bf_range: BfRange::Absolute([bf, bf]),
            side,
            ..Default::default()
        }
    }

    #[test]
    fn virtual_stereo_plane_shifts_by_disparity() {
        let img = stripes(g());
        let depth = ScalarField::constant(g(), 10.0);
        for (side, shift) in [(SidePolicy::Plus, 4i64), (SidePolicy::Minus, -4)] {
            let mut r = rng::stream(1, "t", "vs");
            let pair = synth_virtual_stereo(&img, &depth, &fixed_cfg(40.0, side), &mut r).unwrap();
            assert!(!pair.clamped);
            for y in 0..16 {
                for x in 0..16i64 {
                    let tx = x + shift;
                    if (0..16).contains(&tx) {
                        assert_eq!(pair.view1.pixel(tx as usize, y), img.pixel(x as usize, y));
                        assert_eq!(pair.flow01.get(x as usize, y), Some((shift as f64, 0.0)));
                    } else {
                        assert_eq!(pair.flow01.get(x as usize, y), None);
                    }
                }
            }
        }
    }

    #[test]
    fn virtual_stereo_clamps_large_bf() {
        let img = stripes(g());
        let depth = ScalarField::constant(g(), 10.0);
        let mut r = rng::stream(1, "t", "vs");
        let pair = synth_virtual_stereo(&img, &depth, &fixed_cfg(1000.0, SidePolicy::Plus), &mut r)
            .unwrap();
        assert!(pair.clamped);
        assert!((pair.flow01.max_abs() - 0.3 * 16.0).abs() < 1e-9);
    }

    #[test]
    fn virtual_stereo_requires_valid_depth() {
        let img = stripes(g());
        let depth = ScalarField::from_fn(g(), |_, _| None);
        let mut r = rng::stream(1, "t", "vs");
        let err = synth_virtual_stereo(&img, &depth, &VirtualStereoConfig::default(), &mut r)
            .unwrap_err();
        assert!(matches!(err, Error::EmptyWarp));
    }

    #[test]
    fn virtual_stereo_is_deterministic() {
        let img = stripes(g());
        let depth = ScalarField::from_fn(g(), |x, y| Some(5.0 + (x + y) as f64 * 0.2));
        let cfg = VirtualStereoConfig::default();
        let a = synth_virtual_stereo(&img, &depth, &cfg, &mut rng::stream(3, "a", "vs")).unwrap();
        let b = synth_virtual_stereo(&img, &depth, &cfg, &mut rng::stream(3, "a", "vs")).unwrap();
        assert_eq!(a.flow01, b.flow01);
        assert_eq!(a.view1, b.view1);
        assert_eq!(a.bf.to_bits(), b.bf.to_bits());
    }

    #[test]
    fn stereo_ingest_constant_disparity() {
        let grid = g();
        // right image is the left shifted 2 px to the left
        let left = Image::from_fn(grid, 1, |x, y, _| {
            ((x as f32) * 0.37 + y as f32 * 0.11).sin() * 0.4 + 0.5
        });
        let right = Image::from_fn(grid, 1, |x, y, _| {
            (((x + 2) as f32) * 0.37 + y as f32 * 0.11).sin() * 0.4 + 0.5
        });
        let disp = ScalarField::constant(grid, 2.0);
        let pair = ingest_stereo(&left, &right, &disp, 100.0, Sign::Minus).unwrap();
        assert_eq!(pair.flow01.get(5, 5), Some((-2.0, 0.0)));
        assert_eq!(pair.flow01.get(1, 5), None);
        assert_eq!(pair.depth0.get(3, 3), Some(50.0));
        let err = pair.to_tuple("s").photometric_error().unwrap();
        assert!(err < 0.02, "{err}");

        let z = ingest_stereo(
            &left,
            &right,
            &ScalarField::constant(grid, 4.0),
            100.0,
            Sign::Minus,
        )
        .unwrap();
        assert!(z.depth0.valid_values().all(|v| v == 25.0));
    }

    #[test]
    fn stereo_ingest_errors() {
        let img = stripes(g());
        let small = stripes(PixelGrid::new(8, 8));
        let disp = ScalarField::constant(g(), 2.0);
        assert!(matches!(
            ingest_stereo(&img, &small, &disp, 1.0, Sign::Minus),
            Err(Error::DimensionMismatch { .. })
        ));
        let zero = ScalarField::constant(g(), 0.0);
        assert!(ingest_stereo(&img, &img, &zero, 1.0, Sign::Minus).is_err());
    }
}
