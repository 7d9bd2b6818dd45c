//! Round-trips flow and depth through every supported file format.
//!
//! ```text
//! cargo run --example flow_codecs
//! ```

use depthflow::io;
use depthflow::metrics::evaluate;
use depthflow::{FlowField, PixelGrid, ScalarField};

fn main() -> depthflow::Result<()> {
    let dir = std::env::temp_dir().join("depthflow_codecs");
    std::fs::create_dir_all(&dir)?;
    let grid = PixelGrid::new(40, 30);
    // .flo stores f32, so values are rounded to f32 up front for an exact round trip
    let flow = FlowField::from_fn(grid, |x, y| {
        (!((x + y) as usize).is_multiple_of(9)).then_some((
            (0.37 * x - 5.0) as f32 as f64,
            (-0.21 * y + 1.5) as f32 as f64,
        ))
    });

    io::write_flo(dir.join("f.flo"), &flow)?;
    let back = io::read_flo(dir.join("f.flo"))?;
    println!(
        ".flo       identical: {}  size: {} bytes",
        back == flow,
        std::fs::metadata(dir.join("f.flo"))?.len()
    );

    io::write_kitti_png(dir.join("f.png"), &flow)?;
    let back = io::read_kitti_png(dir.join("f.png"))?;
    let worst = (0..grid.len())
        .filter_map(|i| Some((flow.get_index(i)?, back.get_index(i)?)))
        .map(|(a, b)| (a.0 - b.0).abs().max((a.1 - b.1).abs()))
        .fold(0.0, f64::max);
    println!(
        "KITTI PNG  max error: {worst:.5} px (bound {:.5})  EPE: {:.5}",
        1.0 / 128.0,
        evaluate(&back, &flow)?.epe
    );

    let depth = ScalarField::from_fn(grid, |x, y| {
        (x != y).then_some(1.0 + 0.1 * x as f64 + 0.01 * y as f64)
    });
    io::write_pfm(dir.join("d.pfm"), &depth)?;
    let back = io::read_pfm(dir.join("d.pfm"))?;
    let same = back.valid() == depth.valid()
        && back
            .values()
            .iter()
            .zip(depth.values())
            .all(|(a, b)| *a == (*b as f32) as f64);
    println!("PFM        identical at f32 precision: {same}");

    io::write_depth_png(dir.join("d.png"), &depth, 1000.0)?;
    let back = io::read_depth_png(dir.join("d.png"), 1000.0)?;
    println!(
        "depth PNG  value at (3, 0): {:?} (stored in mm)",
        back.get(3, 0)
    );
    Ok(())
}
