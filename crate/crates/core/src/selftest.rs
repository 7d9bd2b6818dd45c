//! Built-in invariant checks against closed-form answers, run by the
//! `selftest` subcommand.

use serde::Serialize;

use crate::classifier::classify;
use crate::egomotion::{egomotion_flow, CameraModel, RigidMotion};
use crate::error::Result;
use crate::fields::{compose_flows, FlowField, PixelGrid, ScalarField};
use crate::io;
use crate::lateral::{flip_flow, rotation_flow, shear_flow, AugLabel, AugRanges};
use crate::metrics::evaluate;
use crate::rng::stream;
use crate::unify::Sign;

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    /// Measured quantity compared against the bound.
    pub value: f64,
    pub bound: f64,
}

fn max_diff(a: &FlowField, b: &FlowField) -> f64 {
    (0..a.grid().len())
        .filter_map(|i| Some((a.get_index(i)?, b.get_index(i)?)))
        .map(|((au, av), (bu, bv))| (au - bu).abs().max((av - bv).abs()))
        .fold(0.0, f64::max)
}

/// Largest |F + W⁻¹(F, B)| over pixels where the composition is defined.
fn round_trip_residual((fwd, bwd): (FlowField, FlowField)) -> Result<f64> {
    let c = compose_flows(&fwd, &bwd)?;
    Ok(max_diff(&c, &FlowField::zeros(c.grid())))
}

fn check(name: &'static str, value: f64, bound: f64) -> Check {
    Check {
        name,
        passed: value <= bound,
        value,
        bound,
    }
}

/// Runs every check; errors from the library are propagated.
pub fn run() -> Result<Vec<Check>> {
    let g = PixelGrid::new(64, 48);
    let mut out = Vec::new();

    let (fh, _) = flip_flow(g, true);
    let twice = compose_flows(&fh, &fh)?;
    out.push(check(
        "flip_involution",
        max_diff(&twice, &FlowField::zeros(g)),
        0.0,
    ));
    let (fh_x, _) = flip_flow(g, true);
    let analytic = FlowField::from_fn(g, |x, _| Some((g.width as f64 - 1.0 - 2.0 * x, 0.0)));
    out.push(check("flip_closed_form", max_diff(&fh_x, &analytic), 1e-9));

    let center = (30.0, 20.0);
    out.push(check(
        "rotation_round_trip",
        round_trip_residual(rotation_flow(g, 0.3, Sign::Plus, center))?,
        1e-3,
    ));
    out.push(check(
        "shear_round_trip",
        round_trip_residual(shear_flow(g, 0.25, Sign::Minus, true))?,
        1e-3,
    ));

    let cam = CameraModel::default_for(g);
    let depth = ScalarField::from_fn(g, |x, y| Some(4.0 + 0.05 * x as f64 + 0.02 * y as f64));
    let zero = egomotion_flow(&depth, &cam, &RigidMotion::identity())?;
    out.push(check("ego_identity", zero.max_abs(), 1e-6));

    let plane = ScalarField::constant(g, 20.0);
    let tx = 0.3;
    let moved = egomotion_flow(
        &plane,
        &cam,
        &RigidMotion::from_euler(0.0, 0.0, 0.0, [tx, 0.0, 0.0]),
    )?;
    let expected = FlowField::constant(g, cam.fx * tx / 20.0, 0.0);
    out.push(check("ego_translation", max_diff(&moved, &expected), 1e-5));

    let rolled = egomotion_flow(
        &depth,
        &cam,
        &RigidMotion::from_euler(0.0, 0.0, 0.1, [0.0; 3]),
    )?;
    let (rot, _) = rotation_flow(g, 0.1, Sign::Plus, (cam.cx, cam.cy));
    out.push(check(
        "ego_rotation_matches_lateral",
        max_diff(&rolled, &rot),
        1e-4,
    ));

    let f = FlowField::from_fn(g, |x, y| {
        (!((x + y) as usize).is_multiple_of(5)).then_some((0.25 * x - 3.0, -0.125 * y))
    });
    let back = io::decode_flo(&io::encode_flo(&f)?)?;
    out.push(check(
        "flo_round_trip",
        if back == f { 0.0 } else { 1.0 },
        0.0,
    ));
    let back = io::decode_kitti_png(&io::encode_kitti_png(&f)?)?;
    out.push(check("kitti_round_trip", max_diff(&back, &f), 1.0 / 128.0));

    let r = evaluate(&FlowField::constant(g, 3.0, 4.0), &FlowField::zeros(g))?;
    out.push(check("epe_3_4_5", (r.epe - 5.0).abs(), 0.0));

    let ranges = AugRanges::default();
    let mut rng = stream(0, "selftest", "classifier");
    let mut wrong = 0usize;
    let trials = 20;
    for label in [AugLabel::Flip, AugLabel::Rotate, AugLabel::Shear] {
        for _ in 0..trials {
            let (fwd, _) = ranges.sample(label, g, &mut rng).flows(g);
            if classify(&fwd)?.predicted() != label {
                wrong += 1;
            }
        }
    }
    out.push(check(
        "classifier_pure_flows",
        wrong as f64 / (3 * trials) as f64,
        0.05,
    ));
    Ok(out)
}

#[cfg(test)]
mod tests {
    #[test]
    fn all_checks_pass() {
        for c in super::run().unwrap() {
            assert!(c.passed, "{c:?}");
        }
    }
}
