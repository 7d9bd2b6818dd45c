//! Lateral geometric augmentation: a flip, rotation or shear applied to ONE
//! image of a tuple, with the ground-truth flow recomputed by composing the
//! tuple's flow with the augmentation's exact special flow.
//!
//! For an augmentation `A` mapping original pixel `p0` to `p1 = A(p0)`:
//! the special flow is `F_a(p0) = A(p0) - p0` and the backward flow is
//! `B_a(p1) = A⁻¹(p1) - p1`. Augmented images are produced by backward
//! resampling through `B_a`, i.e. `A(I)(p1) = I(p1 + B_a(p1))`.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{compose_flows, FlowField, PixelGrid};
use crate::tuple::{AugRecord, SampleTuple};
use crate::unify::Sign;
use crate::warp::backward_warp_image;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AugKind {
    FlipH,
    FlipV,
    Rotate,
    ShearH,
    ShearV,
    None,
}

/// Coarse augmentation class predicted by the classifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AugLabel {
    Flip,
    Rotate,
    Shear,
    None,
}

impl AugLabel {
    /// Order used by posterior vectors.
    pub const ALL: [AugLabel; 4] = [
        AugLabel::Flip,
        AugLabel::Rotate,
        AugLabel::Shear,
        AugLabel::None,
    ];

    pub fn index(self) -> usize {
        match self {
            AugLabel::Flip => 0,
            AugLabel::Rotate => 1,
            AugLabel::Shear => 2,
            AugLabel::None => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AugLabel::Flip => "flip",
            AugLabel::Rotate => "rotate",
            AugLabel::Shear => "shear",
            AugLabel::None => "none",
        }
    }
}

impl AugKind {
    pub fn label(self) -> AugLabel {
        match self {
            AugKind::FlipH | AugKind::FlipV => AugLabel::Flip,
            AugKind::Rotate => AugLabel::Rotate,
            AugKind::ShearH | AugKind::ShearV => AugLabel::Shear,
            AugKind::None => AugLabel::None,
        }
    }
}

/// Which image of the tuple is augmented.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Source,
    Target,
}

/// Fully specified augmentation. Parameters not used by `kind` are zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugSpec {
    pub kind: AugKind,
    /// Rotation angle in radians.
    pub theta: f64,
    /// Shear magnitude.
    pub lambda: f64,
    /// Direction of rotation or shear, `+1` or `-1`.
    pub sign: i8,
    /// Rotation center in pixel coordinates.
    pub center: [f64; 2],
}

impl AugSpec {
    pub fn none() -> Self {
        AugSpec {
            kind: AugKind::None,
            theta: 0.0,
            lambda: 0.0,
            sign: 1,
            center: [0.0, 0.0],
        }
    }

    pub fn flip(horizontal: bool) -> Self {
        AugSpec {
            kind: if horizontal {
                AugKind::FlipH
            } else {
                AugKind::FlipV
            },
            ..Self::none()
        }
    }

    pub fn rotate(theta: f64, sign: Sign, center: (f64, f64)) -> Self {
        AugSpec {
            kind: AugKind::Rotate,
            theta,
            sign: sign.as_i8(),
            center: [center.0, center.1],
            ..Self::none()
        }
    }

    pub fn shear(lambda: f64, sign: Sign, horizontal: bool) -> Self {
        AugSpec {
            kind: if horizontal {
                AugKind::ShearH
            } else {
                AugKind::ShearV
            },
            lambda,
            sign: sign.as_i8(),
            ..Self::none()
        }
    }

    pub fn label(&self) -> AugLabel {
        self.kind.label()
    }

    /// Hard preconditions: `|theta| < π`, `|lambda| < 1`, unit sign, center
    /// inside the image.
    pub fn validate(&self, grid: PixelGrid) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        match self.kind {
            AugKind::Rotate => {
                if !(self.theta.is_finite() && self.theta.abs() < PI) {
                    return bad(format!("rotation angle {} outside (-π, π)", self.theta));
                }
                if !grid.contains(self.center[0], self.center[1]) {
                    return bad(format!("rotation center {:?} outside image", self.center));
                }
                Sign::from_i8(self.sign).map(|_| ())
            }
            AugKind::ShearH | AugKind::ShearV => {
                if !(self.lambda.is_finite() && self.lambda.abs() < 1.0) {
                    return bad(format!("shear magnitude {} outside (-1, 1)", self.lambda));
                }
                Sign::from_i8(self.sign).map(|_| ())
            }
            _ => Ok(()),
        }
    }

    /// The augmentation map `p -> A(p)`.
    pub fn forward_point(&self, grid: PixelGrid, x: f64, y: f64) -> (f64, f64) {
        let s = self.sign as f64;
        match self.kind {
            AugKind::FlipH => ((grid.width as f64 - 1.0) - x, y),
            AugKind::FlipV => (x, (grid.height as f64 - 1.0) - y),
            AugKind::Rotate => rotate_about(x, y, s * self.theta, self.center),
            AugKind::ShearH => (x + s * self.lambda * y, y),
            AugKind::ShearV => (x, y + s * self.lambda * x),
            AugKind::None => (x, y),
        }
    }

    /// The inverse map `p -> A⁻¹(p)`.
    pub fn inverse_point(&self, grid: PixelGrid, x: f64, y: f64) -> (f64, f64) {
        let s = self.sign as f64;
        match self.kind {
            AugKind::Rotate => rotate_about(x, y, -s * self.theta, self.center),
            AugKind::ShearH => (x - s * self.lambda * y, y),
            AugKind::ShearV => (x, y - s * self.lambda * x),
            _ => self.forward_point(grid, x, y),
        }
    }

    /// Special flow `F_a` and backward flow `B_a` on `grid`.
    pub fn flows(&self, grid: PixelGrid) -> (FlowField, FlowField) {
        let fwd = FlowField::from_fn(grid, |x, y| {
            let (tx, ty) = self.forward_point(grid, x, y);
            Some((tx - x, ty - y))
        });
        let bwd = FlowField::from_fn(grid, |x, y| {
            let (tx, ty) = self.inverse_point(grid, x, y);
            Some((tx - x, ty - y))
        });
        (fwd, bwd)
    }
}

fn rotate_about(x: f64, y: f64, angle: f64, c: [f64; 2]) -> (f64, f64) {
    let (s, co) = angle.sin_cos();
    let (dx, dy) = (x - c[0], y - c[1]);
    (co * dx - s * dy + c[0], s * dx + co * dy + c[1])
}

/// Flip special flow: `u = (width-1) - 2x` (horizontal) or
/// `v = (height-1) - 2y` (vertical). The backward flow equals the forward one.
pub fn flip_flow(grid: PixelGrid, horizontal: bool) -> (FlowField, FlowField) {
    AugSpec::flip(horizontal).flows(grid)
}

/// Rotation by `sign·theta` about `center`.
pub fn rotation_flow(
    grid: PixelGrid,
    theta: f64,
    sign: Sign,
    center: (f64, f64),
) -> (FlowField, FlowField) {
    AugSpec::rotate(theta, sign, center).flows(grid)
}

/// Shear `x += sign·lambda·y` (horizontal) or `y += sign·lambda·x` (vertical).
pub fn shear_flow(
    grid: PixelGrid,
    lambda: f64,
    sign: Sign,
    horizontal: bool,
) -> (FlowField, FlowField) {
    AugSpec::shear(lambda, sign, horizontal).flows(grid)
}

/// Sampling ranges for random augmentations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugRanges {
    pub theta_degrees: [f64; 2],
    pub lambda: [f64; 2],
    /// Rotation centers are drawn from this central fraction of the image.
    pub center_fraction: f64,
}

impl Default for AugRanges {
    fn default() -> Self {
        AugRanges {
            theta_degrees: [5.0, 25.0],
            lambda: [0.1, 0.4],
            center_fraction: 0.5,
        }
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, [lo, hi]: [f64; 2]) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

impl AugRanges {
    pub fn validate(&self) -> Result<()> {
        let [t0, t1] = self.theta_degrees;
        let [l0, l1] = self.lambda;
        if !(0.0 <= t0 && t0 <= t1 && t1 < 180.0) {
            return Err(Error::InvalidParameter(format!(
                "theta range [{t0}, {t1}] invalid"
            )));
        }
        if !(0.0 <= l0 && l0 <= l1 && l1 < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "lambda range [{l0}, {l1}] invalid"
            )));
        }
        if !(0.0..=1.0).contains(&self.center_fraction) {
            return Err(Error::InvalidParameter(
                "center_fraction must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }

    /// True if the spec's parameters lie inside these ranges.
    pub fn contains(&self, spec: &AugSpec, grid: PixelGrid) -> bool {
        let inside = |v: f64, [lo, hi]: [f64; 2]| v >= lo - 1e-12 && v <= hi + 1e-12;
        match spec.kind {
            AugKind::Rotate => {
                let (cx, cy) = self.center_box(grid);
                inside(spec.theta.to_degrees(), self.theta_degrees)
                    && inside(spec.center[0], cx)
                    && inside(spec.center[1], cy)
            }
            AugKind::ShearH | AugKind::ShearV => inside(spec.lambda, self.lambda),
            _ => true,
        }
    }

    fn center_box(&self, grid: PixelGrid) -> ([f64; 2], [f64; 2]) {
        let margin = (1.0 - self.center_fraction) / 2.0;
        let span = |n: usize| {
            let m = n as f64 - 1.0;
            [margin * m, (1.0 - margin) * m]
        };
        (span(grid.width), span(grid.height))
    }

    /// Draws a random augmentation of class `label`.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        label: AugLabel,
        grid: PixelGrid,
        rng: &mut R,
    ) -> AugSpec {
        match label {
            AugLabel::Flip => AugSpec::flip(rng.random_bool(0.5)),
            AugLabel::Rotate => {
                let theta = uniform(rng, self.theta_degrees).to_radians();
                let sign = Sign::random(rng);
                let (bx, by) = self.center_box(grid);
                let cx = uniform(rng, bx);
                let cy = uniform(rng, by);
                AugSpec::rotate(theta, sign, (cx, cy))
            }
            AugLabel::Shear => {
                let lambda = uniform(rng, self.lambda);
                let sign = Sign::random(rng);
                AugSpec::shear(lambda, sign, rng.random_bool(0.5))
            }
            AugLabel::None => AugSpec::none(),
        }
    }
}

/// Augments one image of `tuple` and recomputes its ground truth.
///
/// Target side: `I'_t = A(I_t)` and the flow becomes `F + W⁻¹(F, F_a)`.
/// Source side: `I'_s = A(I_s)` and the flow becomes `B_a + W⁻¹(B_a, F)`.
/// Pixels whose correspondence leaves the image are masked invalid.
pub fn apply_lateral_aug(tuple: &SampleTuple, spec: &AugSpec, side: Side) -> Result<SampleTuple> {
    let grid = tuple.flow.grid();
    spec.validate(grid)?;
    let mut out = tuple.clone();
    out.label = spec.label();
    if spec.kind == AugKind::None {
        return Ok(out);
    }
    let (fwd, bwd) = spec.flows(grid);
    match side {
        Side::Target => {
            out.target = backward_warp_image(&bwd, &tuple.target)?;
            let composed = compose_flows(&tuple.flow, &fwd)?;
            let inside: Vec<bool> = grid
                .pixels()
                .map(|(i, x, y)| {
                    composed
                        .get_index(i)
                        .is_some_and(|(u, v)| grid.contains(x + u, y + v))
                })
                .collect();
            out.flow = composed.masked(&inside);
        }
        Side::Source => {
            out.source = backward_warp_image(&bwd, &tuple.source)?;
            let composed = compose_flows(&bwd, &tuple.flow)?;
            out.flow = composed.masked(out.source.valid());
        }
    }
    out.provenance.augmentation = Some(AugRecord { spec: *spec, side });
    Ok(out)
}
