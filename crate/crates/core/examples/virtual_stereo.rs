//! Turns a monocular image with depth into a stereo pair with exact
//! horizontal ground-truth flow.
//!
//! ```text
//! cargo run --example virtual_stereo [OUT_DIR]
//! ```

use depthflow::io;
use depthflow::rng::stream;
use depthflow::synthetic::scene;
use depthflow::unify::{synth_virtual_stereo, VirtualStereoConfig};
use depthflow::PixelGrid;

fn main() -> depthflow::Result<()> {
    let out = std::env::args().nth(1).map_or_else(
        || std::env::temp_dir().join("depthflow_virtual_stereo"),
        Into::into,
    );
    std::fs::create_dir_all(&out)?;

    let grid = PixelGrid::new(160, 120);
    let s = scene(grid, 42, "living_room");
    let cfg = VirtualStereoConfig::default();
    let mut rng = stream(42, "living_room", "unify");
    let pair = synth_virtual_stereo(&s.image, &s.depth, &cfg, &mut rng)?;
    let tuple = pair.to_tuple("living_room");

    println!(
        "bf            {:.3}{}",
        pair.bf,
        if pair.clamped { " (clamped)" } else { "" }
    );
    println!("side sign     {:+}", pair.sign.as_i8());
    println!("max |u|       {:.2} px", tuple.flow.max_abs());
    println!("coverage      {:.1} %", 100.0 * tuple.coverage());
    println!(
        "photo error   {:.4}",
        tuple.photometric_error().unwrap_or(f64::NAN)
    );

    io::write_image_png(out.join("view0.png"), &pair.view0)?;
    io::write_image_png(out.join("view1.png"), &pair.view1)?;
    io::write_flo(out.join("flow01.flo"), &tuple.flow)?;
    io::write_flow_png(out.join("flow01_color.png"), &tuple.flow)?;
    println!("wrote {}", out.display());
    Ok(())
}
