//! Procedural textured scenes with layered depth, used by the examples,
//! the self-test and the test suites.

use std::path::{Path, PathBuf};

use rand::Rng;

use crate::error::Result;
use crate::fields::{FlowField, Image, PixelGrid, ScalarField};
use crate::io;
use crate::manifest::{DatasetManifest, EntrySource, ManifestEntry};
use crate::rng;
use crate::unify::{depth_to_disparity, disparity_to_flow, Sign};
use crate::warp::forward_splat;

/// Image plus metric depth of the same view.
#[derive(Clone, Debug)]
pub struct Scene {
    pub image: Image,
    pub depth: ScalarField,
}

struct Wave {
    kx: f64,
    ky: f64,
    phase: f64,
    amp: f64,
}

/// Sum of a few plane waves per channel, wavelengths 12 to 24 px.
pub fn textured_image<R: Rng + ?Sized>(grid: PixelGrid, channels: usize, rng: &mut R) -> Image {
    let waves: Vec<Vec<Wave>> = (0..channels)
        .map(|_| {
            (0..3)
                .map(|_| {
                    let dir = rng.random_range(0.0..std::f64::consts::TAU);
                    let k = std::f64::consts::TAU / rng.random_range(12.0..24.0);
                    Wave {
                        kx: k * dir.cos(),
                        ky: k * dir.sin(),
                        phase: rng.random_range(0.0..std::f64::consts::TAU),
                        amp: rng.random_range(0.06..0.13),
                    }
                })
                .collect()
        })
        .collect();
    Image::from_fn(grid, channels, |x, y, c| {
        let (x, y) = (x as f64, y as f64);
        let v: f64 = waves[c]
            .iter()
            .map(|w| w.amp * (w.kx * x + w.ky * y + w.phase).sin())
            .sum();
        (0.5 + v) as f32
    })
}

/// A tilted background plane with one or two fronto-parallel boxes in front.
pub fn layered_depth<R: Rng + ?Sized>(grid: PixelGrid, rng: &mut R) -> ScalarField {
    let (w, h) = (grid.width as f64, grid.height as f64);
    let far = rng.random_range(8.0..12.0);
    let tilt = rng.random_range(-3.0..3.0);
    let boxes: Vec<([f64; 4], f64)> = (0..rng.random_range(1..=2))
        .map(|_| {
            let bw = rng.random_range(0.15..0.3) * w;
            let bh = rng.random_range(0.2..0.4) * h;
            let x0 = rng.random_range(0.1 * w..0.9 * w - bw);
            let y0 = rng.random_range(0.1 * h..0.9 * h - bh);
            ([x0, y0, x0 + bw, y0 + bh], rng.random_range(3.0..5.0))
        })
        .collect();
    ScalarField::from_fn(grid, |x, y| {
        let (xf, yf) = (x as f64, y as f64);
        let mut z = far + tilt * (yf / h - 0.5);
        for ([x0, y0, x1, y1], bz) in &boxes {
            if xf >= *x0 && xf < *x1 && yf >= *y0 && yf < *y1 {
                z = z.min(*bz);
            }
        }
        Some(z)
    })
}

/// Deterministic scene for `(seed, name)`.
pub fn scene(grid: PixelGrid, seed: u64, name: &str) -> Scene {
    let mut r = rng::stream(seed, name, "synthetic");
    let image = textured_image(grid, 3, &mut r);
    let depth = layered_depth(grid, &mut r);
    Scene { image, depth }
}

/// A rectified stereo pair rendered from a scene.
#[derive(Clone, Debug)]
pub struct SyntheticStereo {
    pub left: Image,
    pub right: Image,
    /// Disparity of the left view in pixels.
    pub disparity: ScalarField,
    pub flow: FlowField,
}

/// Renders the right view by splatting the left one with flow `sign · bf / Z`.
pub fn stereo_from_scene(scene: &Scene, bf: f64, sign: Sign) -> Result<SyntheticStereo> {
    let disparity = depth_to_disparity(&scene.depth, bf)?;
    let flow = disparity_to_flow(&disparity, sign);
    let right = forward_splat(&scene.image, &scene.depth, &flow)?.image;
    Ok(SyntheticStereo {
        left: scene.image.clone(),
        right,
        disparity,
        flow,
    })
}

/// Depth PNG scale used by [`write_demo_dataset`] (millimetres).
pub const DEMO_DEPTH_SCALE: f64 = 1000.0;
/// Disparity PNG scale used by [`write_demo_dataset`].
pub const DEMO_DISPARITY_SCALE: f64 = 256.0;
/// Baseline-focal product of the demo stereo entries.
pub const DEMO_BF: f64 = 100.0;

/// Writes `n_mono` monocular and `n_stereo` stereo samples plus a manifest
/// into `dir`, returning the manifest path.
pub fn write_demo_dataset(
    dir: &Path,
    grid: PixelGrid,
    seed: u64,
    n_mono: usize,
    n_stereo: usize,
) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| crate::Error::from(e).at(dir))?;
    let mut entries = Vec::new();
    for k in 0..n_mono {
        let id = format!("mono_{k:03}");
        let s = scene(grid, seed, &id);
        io::write_image_png(dir.join(format!("{id}.png")), &s.image)?;
        io::write_depth_png(
            dir.join(format!("{id}_depth.png")),
            &s.depth,
            DEMO_DEPTH_SCALE,
        )?;
        entries.push(ManifestEntry {
            source: EntrySource::Mono {
                image: format!("{id}.png").into(),
                depth: format!("{id}_depth.png").into(),
            },
            sample_id: id,
            depth_scale: DEMO_DEPTH_SCALE,
            intrinsics: None,
        });
    }
    for k in 0..n_stereo {
        let id = format!("stereo_{k:03}");
        let s = scene(grid, seed, &id);
        let st = stereo_from_scene(&s, DEMO_BF, Sign::Minus)?;
        io::write_image_png(dir.join(format!("{id}_left.png")), &st.left)?;
        io::write_image_png(dir.join(format!("{id}_right.png")), &st.right)?;
        io::write_depth_png(
            dir.join(format!("{id}_disp.png")),
            &st.disparity,
            DEMO_DISPARITY_SCALE,
        )?;
        entries.push(ManifestEntry {
            source: EntrySource::Stereo {
                left: format!("{id}_left.png").into(),
                right: format!("{id}_right.png").into(),
                disparity: format!("{id}_disp.png").into(),
                disparity_sign: Some(-1),
                bf: Some(DEMO_BF),
            },
            sample_id: id,
            depth_scale: DEMO_DISPARITY_SCALE,
            intrinsics: None,
        });
    }
    let path = dir.join("manifest.jsonl");
    io::write_atomic(&path, DatasetManifest { entries }.to_jsonl()?.as_bytes())?;
    Ok(path)
}
