//! Applies flip, rotation and shear to either side of a tuple and checks the
//! recomputed ground truth by photoconsistency.
//!
//! ```text
//! cargo run --example lateral_augmentation
//! ```

use depthflow::lateral::{apply_lateral_aug, AugLabel, AugRanges, Side};
use depthflow::rng::stream;
use depthflow::synthetic::scene;
use depthflow::unify::{synth_virtual_stereo, VirtualStereoConfig};
use depthflow::PixelGrid;

fn main() -> depthflow::Result<()> {
    let grid = PixelGrid::new(128, 96);
    let s = scene(grid, 3, "garden");
    let pair = synth_virtual_stereo(
        &s.image,
        &s.depth,
        &VirtualStereoConfig::default(),
        &mut stream(3, "garden", "unify"),
    )?;
    let base = pair.to_tuple("garden");
    println!(
        "base            coverage {:5.1}%  photo err {:.4}",
        100.0 * base.coverage(),
        base.photometric_error().unwrap_or(f64::NAN)
    );

    let ranges = AugRanges::default();
    let mut rng = stream(3, "garden", "aug");
    for label in [AugLabel::Flip, AugLabel::Rotate, AugLabel::Shear] {
        for side in [Side::Source, Side::Target] {
            let spec = ranges.sample(label, grid, &mut rng);
            let aug = apply_lateral_aug(&base, &spec, side)?;
            println!(
                "{:<7} {:<7} coverage {:5.1}%  photo err {:.4}  ({:?})",
                label.name(),
                format!("{side:?}").to_lowercase(),
                100.0 * aug.coverage(),
                aug.photometric_error().unwrap_or(f64::NAN),
                spec.kind
            );
        }
    }
    Ok(())
}
