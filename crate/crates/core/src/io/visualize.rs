use std::path::Path;

use crate::error::Result;
use crate::fields::{FlowField, Image};

// hue segment lengths of the Middlebury color wheel
const RY: usize = 15;
const YG: usize = 6;
const GC: usize = 4;
const CB: usize = 11;
const BM: usize = 13;
const MR: usize = 6;
const NCOLS: usize = RY + YG + GC + CB + BM + MR;

fn color_wheel() -> [[f64; 3]; NCOLS] {
    let mut wheel = [[0.0; 3]; NCOLS];
    let mut col = 0;
    let mut ramp = |len: usize, f: &dyn Fn(f64) -> [f64; 3]| {
        for i in 0..len {
            wheel[col] = f(255.0 * i as f64 / len as f64);
            col += 1;
        }
    };
    ramp(RY, &|t| [255.0, t, 0.0]);
    ramp(YG, &|t| [255.0 - t, 255.0, 0.0]);
    ramp(GC, &|t| [0.0, 255.0, t]);
    ramp(CB, &|t| [0.0, 255.0 - t, 255.0]);
    ramp(BM, &|t| [t, 0.0, 255.0]);
    ramp(MR, &|t| [255.0, 0.0, 255.0 - t]);
    wheel
}

/// Fractional position on the color wheel, in `[0, NCOLS)`, for a flow
/// direction. Position grows monotonically as the angle `atan2(-v, -u)`
/// sweeps from −π to π.
pub fn wheel_position(u: f64, v: f64) -> f64 {
    let a = (-v).atan2(-u) / std::f64::consts::PI;
    (a + 1.0) / 2.0 * (NCOLS - 1) as f64
}

fn colorize(wheel: &[[f64; 3]; NCOLS], u: f64, v: f64) -> [u8; 3] {
    let rad = u.hypot(v);
    let fk = wheel_position(u, v);
    let k0 = fk.floor() as usize;
    let k1 = (k0 + 1) % NCOLS;
    let f = fk - k0 as f64;
    let mut out = [0u8; 3];
    for c in 0..3 {
        let col = ((1.0 - f) * wheel[k0][c] + f * wheel[k1][c]) / 255.0;
        let col = if rad <= 1.0 {
            1.0 - rad * (1.0 - col)
        } else {
            col * 0.75
        };
        out[c] = (255.0 * col).round().clamp(0.0, 255.0) as u8;
    }
    out
}

/// Renders flow with the standard color coding. Magnitudes are normalized by
/// the 99th percentile of valid magnitudes; invalid pixels are black.
pub fn visualize_flow(flow: &FlowField) -> Image {
    let grid = flow.grid();
    let mut mags: Vec<f64> = (0..grid.len())
        .filter_map(|i| flow.get_index(i))
        .map(|(u, v)| u.hypot(v))
        .collect();
    mags.sort_by(f64::total_cmp);
    let norm = if mags.is_empty() {
        1.0
    } else {
        let k = ((mags.len() - 1) as f64 * 0.99).round() as usize;
        mags[k].max(f64::EPSILON)
    };
    let wheel = color_wheel();
    let colors: Vec<[u8; 3]> = (0..grid.len())
        .map(|i| match flow.get_index(i) {
            Some((u, v)) => colorize(&wheel, u / norm, v / norm),
            None => [0, 0, 0],
        })
        .collect();
    Image::from_fn(grid, 3, |x, y, c| {
        colors[grid.index(x, y)][c] as f32 / 255.0
    })
}

/// Writes the visualization as PNG.
pub fn write_flow_png(path: impl AsRef<Path>, flow: &FlowField) -> Result<()> {
    super::write_image_png(path, &visualize_flow(flow))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::PixelGrid;

    fn rgb(img: &Image, x: usize, y: usize) -> [u8; 3] {
        let p = img.pixel(x, y);
        [0, 1, 2].map(|c| (p[c] * 255.0).round() as u8)
    }

    #[test]
    fn wheel_has_55_entries() {
        assert_eq!(NCOLS, 55);
        assert_eq!(color_wheel()[0], [255.0, 0.0, 0.0]);
    }

    #[test]
    fn zero_flow_is_white_invalid_is_black() {
        let g = PixelGrid::new(2, 1);
        let f = FlowField::new(g, vec![0.0; 2], vec![0.0; 2], vec![true, false]).unwrap();
        let img = visualize_flow(&f);
        assert_eq!(rgb(&img, 0, 0), [255, 255, 255]);
        assert_eq!(rgb(&img, 1, 0), [0, 0, 0]);
    }

    #[test]
    fn hue_is_monotonic_in_angle() {
        let mut prev = -1.0;
        for k in 0..360 {
            let a = -std::f64::consts::PI + (k as f64 + 0.5) * std::f64::consts::TAU / 360.0;
            // direction whose atan2(-v, -u) equals a
            let (u, v) = (-a.cos(), -a.sin());
            let p = wheel_position(u, v);
            assert!(p > prev);
            prev = p;
        }
    }

    #[test]
    fn full_magnitude_is_saturated() {
        let g = PixelGrid::new(1, 1);
        let img = visualize_flow(&FlowField::constant(g, 1.0, 1e-9));
        // just below angle -π the wheel starts at pure red
        assert_eq!(rgb(&img, 0, 0), [255, 0, 0]);
    }
}
