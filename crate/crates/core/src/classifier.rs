//! Augmentation-type classifier over flow appearance, and the training
//! losses built on it.
//!
//! Every lateral augmentation is affine, so it leaves a characteristic
//! signature in the flow Jacobian `J = ∂(u, v)/∂(x, y)`:
//!
//! | class  | robust Jacobian                                  |
//! |--------|--------------------------------------------------|
//! | flip   | one diagonal entry near `-2`                     |
//! | rotate | off-diagonals of opposite sign, `±sin θ`         |
//! | shear  | a single nonzero off-diagonal `±λ`               |
//! | none   | all entries near zero (ego-motion / stereo only) |
//!
//! The classifier aggregates central-difference Jacobians with the median,
//! which ignores depth discontinuities of the underlying base flow, and
//! scores the four classes linearly on features derived from it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::FlowField;
use crate::lateral::AugLabel;
use crate::metrics::mutual_l1;

/// Minimum number of valid pixels needed to extract features.
pub const MIN_VALID_PIXELS: usize = 100;

/// Default weight of the classification term in the total loss.
pub const DEFAULT_LAMBDA_C: f64 = 0.1;

/// Logit scale; larger values give more confident posteriors.
const LOGIT_SCALE: f64 = 60.0;

/// Off-diagonal evidence below this level is attributed to the base flow.
const NONE_THRESHOLD: f64 = 0.05;

/// Fraction of the Jacobian dispersion added to the none threshold.
const DISPERSION_WEIGHT: f64 = 0.25;

const POSTERIOR_FLOOR: f64 = 1e-12;

/// Robust flow-Jacobian statistics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowFeatures {
    /// Median `[[du/dx, du/dy], [dv/dx, dv/dy]]`.
    pub jac: [[f64; 2]; 2],
    /// Median absolute deviation of each Jacobian entry.
    pub jac_dispersion: [[f64; 2]; 2],
    pub mean_mag: f64,
    /// Number of pixels that contributed a Jacobian sample.
    pub samples: usize,
}

/// Class scores in the order Flip, Rotate, Shear, None.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassPosterior {
    pub logits: [f64; 4],
    pub posterior: [f64; 4],
}

impl ClassPosterior {
    pub fn from_logits(logits: [f64; 4]) -> Self {
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exp = logits.map(|l| (l - max).exp());
        let sum: f64 = exp.iter().sum();
        ClassPosterior {
            logits,
            posterior: exp.map(|e| e / sum),
        }
    }

    /// One-hot posterior on `label` (logits of `±inf` are avoided).
    pub fn one_hot(label: AugLabel) -> Self {
        let mut posterior = [0.0; 4];
        posterior[label.index()] = 1.0;
        let logits = posterior.map(|p| if p > 0.0 { 0.0 } else { -1e3 });
        ClassPosterior { logits, posterior }
    }

    pub fn predicted(&self) -> AugLabel {
        let mut best = 0;
        for i in 1..4 {
            if self.posterior[i] > self.posterior[best] {
                best = i;
            }
        }
        AugLabel::ALL[best]
    }

    pub fn probability(&self, label: AugLabel) -> f64 {
        self.posterior[label.index()]
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Central-difference Jacobian at every pixel whose four axis neighbors are
/// valid, aggregated per entry by the median.
pub fn extract_features(flow: &FlowField) -> Result<FlowFeatures> {
    let valid = flow.valid_count();
    if valid < MIN_VALID_PIXELS {
        return Err(Error::TooFewValidPixels {
            found: valid,
            required: MIN_VALID_PIXELS,
        });
    }
    let grid = flow.grid();
    let mut entries: [Vec<f64>; 4] = Default::default();
    let mut mag = 0.0;
    for y in 0..grid.height {
        for x in 0..grid.width {
            if let Some((u, v)) = flow.get(x, y) {
                mag += u.hypot(v);
            }
            if x == 0 || y == 0 || x + 1 == grid.width || y + 1 == grid.height {
                continue;
            }
            let (Some(l), Some(r), Some(t), Some(b)) = (
                flow.get(x - 1, y),
                flow.get(x + 1, y),
                flow.get(x, y - 1),
                flow.get(x, y + 1),
            ) else {
                continue;
            };
            entries[0].push(0.5 * (r.0 - l.0));
            entries[1].push(0.5 * (b.0 - t.0));
            entries[2].push(0.5 * (r.1 - l.1));
            entries[3].push(0.5 * (b.1 - t.1));
        }
    }
    let samples = entries[0].len();
    if samples < MIN_VALID_PIXELS {
        return Err(Error::TooFewValidPixels {
            found: samples,
            required: MIN_VALID_PIXELS,
        });
    }
    let mut med = [0.0; 4];
    let mut mad = [0.0; 4];
    for k in 0..4 {
        med[k] = median(&mut entries[k]);
        let mut dev: Vec<f64> = entries[k].iter().map(|e| (e - med[k]).abs()).collect();
        mad[k] = median(&mut dev);
    }
    Ok(FlowFeatures {
        jac: [[med[0], med[1]], [med[2], med[3]]],
        jac_dispersion: [[mad[0], mad[1]], [mad[2], mad[3]]],
        mean_mag: mag / valid as f64,
        samples,
    })
}

/// Linear class scores on derived Jacobian features.
pub fn score(features: &FlowFeatures) -> ClassPosterior {
    let [[a, b], [c, d]] = features.jac;
    // distance of the nearest diagonal entry to the mirror value -2
    let flip = (1.0 - (a + 2.0).abs().min((d + 2.0).abs())).max(0.0);
    // rotation: off-diagonals of opposite sign and similar size
    let rotate = (-b * c).max(0.0).sqrt();
    // shear: one off-diagonal dominates the other
    let shear = (b.abs() - c.abs()).abs();
    let dispersion = features
        .jac_dispersion
        .iter()
        .flatten()
        .fold(0.0f64, |m, v| m.max(*v));
    let none = NONE_THRESHOLD + DISPERSION_WEIGHT * dispersion;
    ClassPosterior::from_logits([
        LOGIT_SCALE * flip,
        LOGIT_SCALE * rotate,
        LOGIT_SCALE * shear,
        LOGIT_SCALE * none,
    ])
}

/// Posterior over {Flip, Rotate, Shear, None} for a flow field.
pub fn classify(flow: &FlowField) -> Result<ClassPosterior> {
    extract_features(flow).map(|f| score(&f))
}

/// Mean absolute error over mutually valid pixels, both components.
pub fn loss_lp(pred: &FlowField, gt: &FlowField) -> Result<f64> {
    mutual_l1(pred, gt)
}

/// Cross entropy `-ln posterior[label]`, floored at `1e-12`.
pub fn loss_lc(posterior: &ClassPosterior, label: AugLabel) -> f64 {
    (-posterior.probability(label).max(POSTERIOR_FLOOR).ln()).max(0.0)
}

/// `L_P + lambda_c · L_C`.
pub fn loss_total(
    pred: &FlowField,
    gt: &FlowField,
    posterior: &ClassPosterior,
    label: AugLabel,
    lambda_c: f64,
) -> Result<f64> {
    if !(lambda_c >= 0.0 && lambda_c.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "lambda_c must be non-negative, got {lambda_c}"
        )));
    }
    Ok(loss_lp(pred, gt)? + lambda_c * loss_lc(posterior, label))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::PixelGrid;
    use crate::lateral::{flip_flow, rotation_flow, shear_flow};
    use crate::unify::Sign;

    fn grid() -> PixelGrid {
        PixelGrid::new(40, 30)
    }

    #[test]
    fn jacobian_of_special_flows() {
        let f = extract_features(&flip_flow(grid(), true).0).unwrap();
        assert_eq!(f.jac, [[-2.0, 0.0], [0.0, 0.0]]);

        let theta = 0.3;
        let f =
            extract_features(&rotation_flow(grid(), theta, Sign::Plus, (20.0, 15.0)).0).unwrap();
        let [[a, b], [c, d]] = f.jac;
        assert!((a - (theta.cos() - 1.0)).abs() < 1e-9);
        assert!((d - (theta.cos() - 1.0)).abs() < 1e-9);
        assert!((b + theta.sin()).abs() < 1e-9);
        assert!((c - theta.sin()).abs() < 1e-9);

        let f = extract_features(&shear_flow(grid(), 0.25, Sign::Plus, true).0).unwrap();
        let [[a, b], [c, d]] = f.jac;
        assert!(a.abs() < 1e-12 && c.abs() < 1e-12 && d.abs() < 1e-12);
        assert!((b - 0.25).abs() < 1e-12);
    }

    #[test]
    fn classifies_pure_flows() {
        assert_eq!(
            classify(&FlowField::zeros(grid())).unwrap().predicted(),
            AugLabel::None
        );
        let p = classify(&flip_flow(grid(), false).0).unwrap();
        assert_eq!(p.predicted(), AugLabel::Flip);
        assert!(p.probability(AugLabel::Flip) > 0.9);
        let p = classify(&rotation_flow(grid(), 0.1, Sign::Minus, (10.0, 10.0)).0).unwrap();
        assert_eq!(p.predicted(), AugLabel::Rotate);
        let p = classify(&shear_flow(grid(), 0.15, Sign::Minus, false).0).unwrap();
        assert_eq!(p.predicted(), AugLabel::Shear);
    }

    #[test]
    fn too_few_pixels() {
        let small = FlowField::zeros(PixelGrid::new(9, 9));
        assert!(matches!(
            classify(&small),
            Err(Error::TooFewValidPixels { .. })
        ));
    }

    #[test]
    fn posterior_is_normalized() {
        for logits in [[0.0; 4], [1e3, -1e3, 5.0, 0.0], [-7.0, -7.5, -8.0, -100.0]] {
            let p = ClassPosterior::from_logits(logits);
            assert!((p.posterior.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(p.posterior.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn cross_entropy_examples() {
        assert_eq!(
            loss_lc(&ClassPosterior::one_hot(AugLabel::Shear), AugLabel::Shear),
            0.0
        );
        let uniform = ClassPosterior::from_logits([0.0; 4]);
        assert!((loss_lc(&uniform, AugLabel::Flip) - 4f64.ln()).abs() < 1e-12);
        let half = ClassPosterior {
            logits: [0.0; 4],
            posterior: [0.5, 0.5 / 3.0, 0.5 / 3.0, 0.5 / 3.0],
        };
        assert!((loss_lc(&half, AugLabel::Flip) - 2f64.ln()).abs() < 1e-12);
        let zero = ClassPosterior::one_hot(AugLabel::Flip);
        assert!((loss_lc(&zero, AugLabel::None) - (-(1e-12f64).ln())).abs() < 1e-9);
    }

    #[test]
    fn lp_and_total_loss() {
        let g = PixelGrid::new(5, 4);
        let gt = FlowField::from_fn(g, |x, y| Some((x * 0.5, -y)));
        assert_eq!(loss_lp(&gt, &gt).unwrap(), 0.0);
        let pred = FlowField::from_fn(g, |x, y| Some((x * 0.5 + 1.0, -y)));
        assert!((loss_lp(&pred, &gt).unwrap() - 0.5).abs() < 1e-12);
        let disjoint = FlowField::from_fn(g, |_, _| None);
        assert!(loss_lp(&disjoint, &gt).is_err());

        let uniform = ClassPosterior::from_logits([0.0; 4]);
        assert_eq!(
            loss_total(&pred, &gt, &uniform, AugLabel::Rotate, 0.0).unwrap(),
            loss_lp(&pred, &gt).unwrap()
        );
        let one_hot = ClassPosterior::one_hot(AugLabel::Rotate);
        assert_eq!(
            loss_total(&gt, &gt, &one_hot, AugLabel::Rotate, 0.7).unwrap(),
            0.0
        );
        // L_P = 1, L_C = 2
        let pred2 = FlowField::from_fn(g, |x, y| Some((x * 0.5 + 2.0, -y)));
        let p = (-2.0f64).exp();
        let post = ClassPosterior {
            logits: [0.0; 4],
            posterior: [p, (1.0 - p) / 3.0, (1.0 - p) / 3.0, (1.0 - p) / 3.0],
        };
        let total = loss_total(&pred2, &gt, &post, AugLabel::Flip, 0.5).unwrap();
        assert!((total - 2.0).abs() < 1e-12);
        assert!(loss_total(&pred2, &gt, &post, AugLabel::Flip, -1.0).is_err());
    }
}
