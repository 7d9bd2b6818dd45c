//! Novel-view synthesis by depth-aware forward splatting, and backward
//! image warping.

use crate::error::{Error, Result};
use crate::fields::{Bilinear, FlowField, Image, PixelGrid, ScalarField};

/// Relative depth band treated as one surface by the splatting z-buffer.
///
/// Contributions landing on a target pixel whose depth exceeds the nearest
/// contribution by more than this fraction are discarded as occluded.
pub const DEPTH_TOLERANCE: f64 = 0.05;

/// Output of [`forward_splat`].
#[derive(Clone, Debug)]
pub struct WarpResult {
    /// Splatted image; its mask equals `valid`.
    pub image: Image,
    /// Splatted depth; its mask equals `valid`.
    pub depth: ScalarField,
    pub valid: Vec<bool>,
    /// Target pixels where at least one contribution lost the depth test.
    pub occluded: Vec<bool>,
    /// Target pixels that received no contribution.
    pub holes: Vec<bool>,
    /// Accumulated bilinear weight per target pixel (before normalization).
    pub weight: Vec<f64>,
}

impl WarpResult {
    pub fn hole_count(&self) -> usize {
        self.holes.iter().filter(|h| **h).count()
    }

    pub fn occluded_count(&self) -> usize {
        self.occluded.iter().filter(|o| **o).count()
    }
}

struct Splat {
    valid: Vec<bool>,
    occluded: Vec<bool>,
    weight: Vec<f64>,
    depth: Vec<f64>,
    color: Vec<f64>,
}

/// Bilinear footprint of a splat centered at `(tx, ty)`. Neighbors outside
/// the grid or with zero weight are skipped.
fn footprint(grid: PixelGrid, tx: f64, ty: f64) -> impl Iterator<Item = (usize, f64)> {
    let x0 = tx.floor();
    let y0 = ty.floor();
    let fx = tx - x0;
    let fy = ty - y0;
    let corners = [
        (x0, y0, (1.0 - fx) * (1.0 - fy)),
        (x0 + 1.0, y0, fx * (1.0 - fy)),
        (x0, y0 + 1.0, (1.0 - fx) * fy),
        (x0 + 1.0, y0 + 1.0, fx * fy),
    ];
    corners
        .into_iter()
        .filter(move |&(cx, cy, w)| {
            w > 0.0 && cx >= 0.0 && cy >= 0.0 && cx < grid.width as f64 && cy < grid.height as f64
        })
        .map(move |(cx, cy, w)| (grid.index(cx as usize, cy as usize), w))
}

fn splat(
    grid: PixelGrid,
    image: Option<&Image>,
    depth: &ScalarField,
    flow: &FlowField,
) -> Result<Splat> {
    grid.ensure_same(&depth.grid())?;
    grid.ensure_same(&flow.grid())?;
    let channels = image.map_or(0, Image::channels);
    let n = grid.len();

    // Sources in row-major order; accumulation order is fixed, so the result
    // does not depend on scheduling.
    let sources: Vec<(usize, f64, f64, f64)> = grid
        .pixels()
        .filter_map(|(i, x, y)| {
            let (u, v) = flow.get_index(i)?;
            let z = depth.values()[i];
            let image_ok = image.is_none_or(|im| im.valid()[i]);
            (depth.valid()[i] && z > 0.0 && image_ok).then_some((i, x + u, y + v, z))
        })
        .collect();
    if sources.is_empty() {
        return Err(Error::EmptyWarp);
    }

    let mut zmin = vec![f64::INFINITY; n];
    for &(_, tx, ty, z) in &sources {
        for (t, _) in footprint(grid, tx, ty) {
            if z < zmin[t] {
                zmin[t] = z;
            }
        }
    }

    let mut weight = vec![0.0; n];
    let mut zacc = vec![0.0; n];
    let mut cacc = vec![0.0; n * channels];
    let mut occluded = vec![false; n];
    for &(s, tx, ty, z) in &sources {
        for (t, w) in footprint(grid, tx, ty) {
            if z > zmin[t] * (1.0 + DEPTH_TOLERANCE) {
                occluded[t] = true;
                continue;
            }
            weight[t] += w;
            zacc[t] += w * z;
            if let Some(im) = image {
                for c in 0..channels {
                    cacc[t * channels + c] += w * im.data()[s * channels + c] as f64;
                }
            }
        }
    }

    let valid: Vec<bool> = weight.iter().map(|w| *w > 0.0).collect();
    for t in 0..n {
        if valid[t] {
            zacc[t] /= weight[t];
            for c in 0..channels {
                cacc[t * channels + c] /= weight[t];
            }
        }
    }
    Ok(Splat {
        valid,
        occluded,
        weight,
        depth: zacc,
        color: cacc,
    })
}

/// Splats every valid source pixel to `x + flow(x)` with bilinear weights,
/// resolving collisions with a depth buffer (nearest surface wins).
///
/// `source_depth` is the depth each source point has in the *target* view;
/// it drives the z-test and is splatted into [`WarpResult::depth`].
pub fn forward_splat(
    source: &Image,
    source_depth: &ScalarField,
    flow: &FlowField,
) -> Result<WarpResult> {
    let grid = source.grid();
    let s = splat(grid, Some(source), source_depth, flow)?;
    let channels = source.channels();
    let data: Vec<f32> = s
        .color
        .iter()
        .map(|c| (*c as f32).clamp(0.0, 1.0))
        .collect();
    let image = Image::with_mask(grid, channels, data, s.valid.clone())?;
    let depth = ScalarField::new(grid, s.depth, s.valid.clone())?;
    let holes = s.valid.iter().map(|v| !v).collect();
    Ok(WarpResult {
        image,
        depth,
        valid: s.valid,
        occluded: s.occluded,
        holes,
        weight: s.weight,
    })
}

/// Depth-only variant of [`forward_splat`].
pub fn forward_splat_depth(source_depth: &ScalarField, flow: &FlowField) -> Result<ScalarField> {
    let grid = source_depth.grid();
    let s = splat(grid, None, source_depth, flow)?;
    ScalarField::new(grid, s.depth, s.valid)
}

/// Gathers `source(x + flow(x))`; the returned image's mask marks pixels
/// whose flow is valid and whose lookup is in bounds and valid.
pub fn backward_warp_image(target_coords_flow: &FlowField, source: &Image) -> Result<Image> {
    let grid = source.grid();
    grid.ensure_same(&target_coords_flow.grid())?;
    let channels = source.channels();
    let mut data = vec![0.0f32; grid.len() * channels];
    let mut valid = vec![false; grid.len()];
    for (i, x, y) in grid.pixels() {
        let Some((u, v)) = target_coords_flow.get_index(i) else {
            continue;
        };
        let s = source.sample(x + u, y + v);
        if s.valid {
            valid[i] = true;
            data[i * channels..(i + 1) * channels].copy_from_slice(&s.value[..channels]);
        }
    }
    Image::with_mask(grid, channels, data, valid)
}

/// Source pixels whose flow lands on the visible surface of the target view.
///
/// `point_depth` is the depth each source point has in the target view and
/// `target_depth` the splatted target depth. A pixel is visible when the
/// bilinear target depth at `x + flow(x)` is valid and agrees with the
/// point's depth within [`DEPTH_TOLERANCE`].
pub fn visibility_mask(
    flow: &FlowField,
    point_depth: &ScalarField,
    target_depth: &ScalarField,
) -> Result<Vec<bool>> {
    let grid = flow.grid();
    grid.ensure_same(&point_depth.grid())?;
    grid.ensure_same(&target_depth.grid())?;
    Ok(grid
        .pixels()
        .map(|(i, x, y)| {
            let (Some((u, v)), true) = (flow.get_index(i), point_depth.valid()[i]) else {
                return false;
            };
            let zp = point_depth.values()[i];
            let s = target_depth.sample(x + u, y + v);
            s.valid && (s.value - zp).abs() <= DEPTH_TOLERANCE * zp
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn textured(grid: PixelGrid) -> Image {
        Image::from_fn(grid, 3, |x, y, c| {
            ((x * 7 + y * 13 + c * 5) % 17) as f32 / 16.0
        })
    }

    #[test]
    fn zero_flow_is_identity() {
        let g = PixelGrid::new(16, 16);
        let img = textured(g);
        let depth = ScalarField::from_fn(g, |x, y| Some(1.0 + 0.1 * x as f64 + 0.03 * y as f64));
        let r = forward_splat(&img, &depth, &FlowField::zeros(g)).unwrap();
        assert_eq!(r.image.data(), img.data());
        assert_eq!(r.depth.values(), depth.values());
        assert_eq!(r.hole_count(), 0);
        assert_eq!(r.occluded_count(), 0);
    }

    #[test]
    fn constant_shift_moves_image_and_opens_holes() {
        let g = PixelGrid::new(16, 16);
        let img = textured(g);
        let depth = ScalarField::constant(g, 3.0);
        let r = forward_splat(&img, &depth, &FlowField::constant(g, 5.0, 0.0)).unwrap();
        for y in 0..16 {
            for x in 0..16 {
                let i = g.index(x, y);
                if x < 5 {
                    assert!(r.holes[i]);
                    assert!(!r.valid[i]);
                } else {
                    assert!(r.valid[i]);
                    assert_eq!(r.image.pixel(x, y), img.pixel(x - 5, y));
                    assert_eq!(r.depth.get(x, y), Some(3.0));
                }
            }
        }
    }

    #[test]
    fn nearer_surface_wins_collision() {
        let g = PixelGrid::new(2, 1);
        let img = Image::new(2, 1, 1, vec![0.2, 0.9]).unwrap();
        let depth = ScalarField::new(g, vec![1.0, 2.0], vec![true, true]).unwrap();
        // pixel 0 moves onto pixel 1
        let flow = FlowField::new(g, vec![1.0, 0.0], vec![0.0, 0.0], vec![true, true]).unwrap();
        let r = forward_splat(&img, &depth, &flow).unwrap();
        assert_eq!(r.image.pixel(1, 0), &[0.2]);
        assert_eq!(r.depth.get(1, 0), Some(1.0));
        assert!(r.occluded[1]);
        assert!(r.valid[1]);
        assert!(r.holes[0]);
    }

    #[test]
    fn all_invalid_flow_is_empty_warp() {
        let g = PixelGrid::new(4, 4);
        let flow = FlowField::from_fn(g, |_, _| None);
        let err = forward_splat(&textured(g), &ScalarField::constant(g, 1.0), &flow).unwrap_err();
        assert!(matches!(err, Error::EmptyWarp));
    }

    #[test]
    fn fractional_shift_conserves_mass() {
        let g = PixelGrid::new(12, 9);
        let flow = FlowField::constant(g, 0.3, 0.6);
        let r = forward_splat(&textured(g), &ScalarField::constant(g, 2.0), &flow).unwrap();
        let total: f64 = r.weight.iter().sum();
        // sources whose full footprint lands inside the grid
        let inside = (0..g.width - 1).count() * (0..g.height - 1).count();
        let border: f64 = g
            .pixels()
            .filter(|(_, x, y)| *x as usize == g.width - 1 || *y as usize == g.height - 1)
            .map(|(_, x, y)| {
                let tx = x + 0.3;
                let ty = y + 0.6;
                footprint(g, tx, ty).map(|(_, w)| w).sum::<f64>()
            })
            .sum();
        assert!((total - (inside as f64 + border)).abs() < 1e-9);
    }

    #[test]
    fn backward_warp_shifts_ramp() {
        let g = PixelGrid::new(10, 3);
        let ramp = Image::from_fn(g, 1, |x, _, _| x as f32 / 10.0);
        let out = backward_warp_image(&FlowField::constant(g, 1.0, 0.0), &ramp).unwrap();
        for y in 0..3 {
            for x in 0..9 {
                assert!((out.pixel(x, y)[0] - (x + 1) as f32 / 10.0).abs() < 1e-6);
            }
            assert!(!out.valid()[g.index(9, y)]);
        }
        let same = backward_warp_image(&FlowField::zeros(g), &ramp).unwrap();
        assert_eq!(same, ramp);
    }

    #[test]
    fn backward_warp_dimension_mismatch() {
        let img = textured(PixelGrid::new(4, 4));
        assert!(backward_warp_image(&FlowField::zeros(PixelGrid::new(4, 5)), &img).is_err());
    }

    #[test]
    fn visibility_excludes_occluded_points() {
        let g = PixelGrid::new(2, 1);
        let depth = ScalarField::new(g, vec![1.0, 2.0], vec![true, true]).unwrap();
        let flow = FlowField::new(g, vec![1.0, 0.0], vec![0.0, 0.0], vec![true, true]).unwrap();
        let target = forward_splat_depth(&depth, &flow).unwrap();
        assert_eq!(
            visibility_mask(&flow, &depth, &target).unwrap(),
            vec![true, false]
        );
    }
}
