//! Writes a small synthetic dataset and manifest, then runs the full
//! generation pipeline over it.
//!
//! ```text
//! cargo run --release --example generate_dataset [OUT_DIR]
//! ```

use depthflow::config::GenConfig;
use depthflow::generate::run_generation;
use depthflow::manifest::DatasetManifest;
use depthflow::synthetic::write_demo_dataset;
use depthflow::PixelGrid;

fn main() -> depthflow::Result<()> {
    let root = std::env::args().nth(1).map_or_else(
        || std::env::temp_dir().join("depthflow_dataset"),
        Into::into,
    );
    let manifest_path =
        write_demo_dataset(&root.join("inputs"), PixelGrid::new(128, 96), 2024, 2, 2)?;
    println!("manifest: {}", manifest_path.display());

    let manifest = DatasetManifest::load(&manifest_path)?;
    let cfg = GenConfig {
        global_seed: 2024,
        ..GenConfig::default()
    };
    let out = root.join("generated");
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let report = run_generation(&manifest, &cfg, &out, workers)?;

    println!(
        "{} tuples from {} samples",
        report.tuple_count(),
        report.samples_ok
    );
    for (kind, stats) in &report.coverage {
        println!(
            "  {kind:<11} n={} coverage min {:.1}% mean {:.1}%",
            stats.count,
            100.0 * stats.min,
            100.0 * stats.mean
        );
    }
    for (class, stats) in &report.augmented_coverage {
        println!(
            "  +{class:<10} n={} coverage min {:.1}% mean {:.1}%",
            stats.count,
            100.0 * stats.min,
            100.0 * stats.mean
        );
    }
    for e in &report.events {
        println!("  event {} {}: {}", e.sample_id, e.event, e.detail);
    }
    println!("output: {}", out.display());
    Ok(())
}
