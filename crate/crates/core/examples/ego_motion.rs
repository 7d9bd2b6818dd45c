//! Adds a random camera motion to a stereo pair and derives the three flows
//! F01, F12 and the composed F02.
//!
//! ```text
//! cargo run --example ego_motion
//! ```

use depthflow::egomotion::{synth_general_tuples, CameraModel, MotionSamplingConfig};
use depthflow::rng::stream;
use depthflow::synthetic::scene;
use depthflow::unify::{synth_virtual_stereo, VirtualStereoConfig};
use depthflow::PixelGrid;

fn main() -> depthflow::Result<()> {
    let grid = PixelGrid::new(128, 96);
    let s = scene(grid, 7, "courtyard");
    let pair = synth_virtual_stereo(
        &s.image,
        &s.depth,
        &VirtualStereoConfig::default(),
        &mut stream(7, "courtyard", "unify"),
    )?;
    let cam = CameraModel::default_for(grid);
    let tuples = synth_general_tuples(
        &pair,
        "courtyard",
        &cam,
        &MotionSamplingConfig::default(),
        &mut stream(7, "courtyard", "ego"),
    )?;

    if let Some(m) = tuples[1].provenance.motion {
        println!(
            "euler (rad)   {:+.4} {:+.4} {:+.4}",
            m.euler[0], m.euler[1], m.euler[2]
        );
        println!(
            "translation   {:+.4} {:+.4} {:+.4}",
            m.translation[0], m.translation[1], m.translation[2]
        );
    }
    println!(
        "{:<10} {:>9} {:>9} {:>11}",
        "kind", "coverage", "max|F|", "photo err"
    );
    for t in &tuples {
        println!(
            "{:<10} {:>8.1}% {:>9.2} {:>11.4}",
            t.provenance.kind.name(),
            100.0 * t.coverage(),
            t.flow.max_abs(),
            t.photometric_error().unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
