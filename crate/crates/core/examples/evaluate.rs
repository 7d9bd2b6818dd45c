//! Scores predicted flow against ground truth with EPE and F1-all, for a
//! single pair and for two directories of `.flo` files.
//!
//! ```text
//! cargo run --example evaluate
//! ```

use depthflow::io;
use depthflow::metrics::{evaluate, evaluate_directories};
use depthflow::{FlowField, PixelGrid};

fn main() -> depthflow::Result<()> {
    let grid = PixelGrid::new(64, 48);
    let gt = FlowField::from_fn(grid, |x, y| Some((0.2 * (x - 32.0), 0.1 * (y - 24.0))));

    let cases = [
        ("exact", gt.clone()),
        (
            "offset (3, 4)",
            FlowField::from_fn(grid, |x, y| {
                gt.get(x as usize, y as usize)
                    .map(|(u, v)| (u + 3.0, v + 4.0))
            }),
        ),
        ("10% scale", gt.scaled(1.1)),
        (
            "left half missing",
            FlowField::from_fn(grid, |x, y| {
                (x >= 32.0).then(|| gt.get(x as usize, y as usize).unwrap())
            }),
        ),
    ];
    for (name, pred) in &cases {
        let r = evaluate(pred, &gt)?;
        println!(
            "{name:<18} EPE {:6.3}  F1-all {:6.2}%  missing {}",
            r.epe, r.f1_all, r.n_missing
        );
    }

    let root = std::env::temp_dir().join("depthflow_evaluate");
    let (pred_dir, gt_dir) = (root.join("pred"), root.join("gt"));
    std::fs::create_dir_all(&pred_dir)?;
    std::fs::create_dir_all(&gt_dir)?;
    for (i, (_, pred)) in cases.iter().enumerate() {
        io::write_flo(gt_dir.join(format!("{i}.flo")), &gt)?;
        io::write_flo(pred_dir.join(format!("{i}.flo")), pred)?;
    }
    let r = evaluate_directories(&pred_dir, &gt_dir, io::FlowFormat::Flo)?;
    println!(
        "pooled over {} files: EPE {:.3}  F1-all {:.2}%",
        r.files, r.totals.epe, r.totals.f1_all
    );
    Ok(())
}
