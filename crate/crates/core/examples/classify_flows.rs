//! Recognizes the augmentation contained in a flow field, on pure special
//! flows and on augmentations composed with ego-motion flow.
//!
//! ```text
//! cargo run --release --example classify_flows
//! ```

use depthflow::classifier::{classify, loss_lc, loss_total, DEFAULT_LAMBDA_C};
use depthflow::egomotion::{synth_general_tuples, CameraModel, MotionSamplingConfig};
use depthflow::lateral::{apply_lateral_aug, AugLabel, AugRanges, Side};
use depthflow::rng::stream;
use depthflow::synthetic::scene;
use depthflow::unify::{synth_virtual_stereo, VirtualStereoConfig};
use depthflow::PixelGrid;

fn main() -> depthflow::Result<()> {
    let grid = PixelGrid::new(96, 72);
    let ranges = AugRanges::default();
    let mut rng = stream(11, "classify", "pure");

    println!("pure special flows");
    for label in [AugLabel::Flip, AugLabel::Rotate, AugLabel::Shear] {
        let n = 50;
        let hits = (0..n)
            .filter(|_| {
                let (fwd, _) = ranges.sample(label, grid, &mut rng).flows(grid);
                classify(&fwd).is_ok_and(|p| p.predicted() == label)
            })
            .count();
        println!("  {:<7} {hits}/{n}", label.name());
    }

    println!("augmentations on ego-motion tuples");
    let cam = CameraModel::default_for(grid);
    for (i, label) in [
        AugLabel::Flip,
        AugLabel::Rotate,
        AugLabel::Shear,
        AugLabel::None,
    ]
    .into_iter()
    .enumerate()
    {
        let id = format!("scene_{i}");
        let s = scene(grid, 11, &id);
        let pair = synth_virtual_stereo(
            &s.image,
            &s.depth,
            &VirtualStereoConfig::default(),
            &mut stream(11, &id, "unify"),
        )?;
        let tuples = synth_general_tuples(
            &pair,
            &id,
            &cam,
            &MotionSamplingConfig::default(),
            &mut stream(11, &id, "ego"),
        )?;
        let spec = ranges.sample(label, grid, &mut rng);
        let aug = apply_lateral_aug(&tuples[2], &spec, Side::Target)?;
        let posterior = classify(&aug.flow)?;
        let loss = loss_total(
            &aug.flow,
            &tuples[2].flow,
            &posterior,
            label,
            DEFAULT_LAMBDA_C,
        )?;
        println!(
            "  true {:<7} predicted {:<7} p(true) {:.3}  L_c {:.3}  L_total vs unaugmented {:.3}",
            label.name(),
            posterior.predicted().name(),
            posterior.probability(label),
            loss_lc(&posterior, label),
            loss
        );
    }
    Ok(())
}
