//! Renders the special flows with the standard flow color wheel.
//!
//! ```text
//! cargo run --example visualize [OUT_DIR]
//! ```

use depthflow::io::write_flow_png;
use depthflow::lateral::{flip_flow, rotation_flow, shear_flow};
use depthflow::unify::Sign;
use depthflow::{FlowField, PixelGrid};

fn main() -> depthflow::Result<()> {
    let out = std::env::args().nth(1).map_or_else(
        || std::env::temp_dir().join("depthflow_visualize"),
        Into::into,
    );
    std::fs::create_dir_all(&out)?;
    let grid = PixelGrid::new(200, 150);
    let fields = [
        (
            "rotation",
            rotation_flow(grid, 0.4, Sign::Plus, (99.5, 74.5)).0,
        ),
        ("flip_h", flip_flow(grid, true).0),
        ("shear_v", shear_flow(grid, 0.3, Sign::Minus, false).0),
        (
            "radial",
            FlowField::from_fn(grid, |x, y| Some((x - 99.5, y - 74.5))),
        ),
    ];
    for (name, flow) in &fields {
        let path = out.join(format!("{name}.png"));
        write_flow_png(&path, flow)?;
        println!("{}", path.display());
    }
    Ok(())
}
