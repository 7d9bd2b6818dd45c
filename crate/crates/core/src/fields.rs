//! Dense per-pixel fields and the sampling primitives shared by every warp.
//!
//! Coordinates are zero-indexed pixel centers: the pixel stored at row `i`,
//! column `j` sits at `(x = j, y = i)`. Every field carries a validity mask;
//! invalid pixels always store zero so that serialized output is
//! deterministic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Width and height of a dense pixel grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PixelGrid {
    pub width: usize,
    pub height: usize,
}

impl PixelGrid {
    pub const fn new(width: usize, height: usize) -> Self {
        PixelGrid { width, height }
    }

    pub const fn len(&self) -> usize {
        self.width * self.height
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub const fn index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    /// Pixel-center coordinate of a row-major index.
    #[inline]
    pub fn coords(&self, index: usize) -> (f64, f64) {
        ((index % self.width) as f64, (index / self.width) as f64)
    }

    /// True if `(x, y)` lies inside the hull of pixel centers.
    #[inline]
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= 0.0 && y >= 0.0 && x <= (self.width as f64 - 1.0) && y <= (self.height as f64 - 1.0)
    }

    /// Iterates `(index, x, y)` in row-major order.
    pub fn pixels(&self) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        (0..self.len()).map(move |i| {
            let (x, y) = self.coords(i);
            (i, x, y)
        })
    }

    pub(crate) fn ensure_same(&self, other: &PixelGrid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                left_w: self.width,
                left_h: self.height,
                right_w: other.width,
                right_h: other.height,
            })
        }
    }
}

/// Result of a bilinear lookup. `value` is zero whenever `valid` is false.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sample<T> {
    pub value: T,
    pub valid: bool,
}

/// Bilinear interpolation taps: row-major indices and weights.
///
/// Neighbors with zero weight collapse onto the lower neighbor, so a lookup
/// exactly on a pixel center (including the last row or column) touches only
/// that pixel.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Taps {
    pub idx: [usize; 4],
    pub w: [f64; 4],
}

#[inline]
pub(crate) fn taps(grid: PixelGrid, x: f64, y: f64) -> Option<Taps> {
    if !grid.contains(x, y) {
        return None;
    }
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let x0 = x0 as usize;
    let y0 = y0 as usize;
    let x1 = if fx > 0.0 { x0 + 1 } else { x0 };
    let y1 = if fy > 0.0 { y0 + 1 } else { y0 };
    Some(Taps {
        idx: [
            grid.index(x0, y0),
            grid.index(x1, y0),
            grid.index(x0, y1),
            grid.index(x1, y1),
        ],
        w: [
            (1.0 - fx) * (1.0 - fy),
            fx * (1.0 - fy),
            (1.0 - fx) * fy,
            fx * fy,
        ],
    })
}

#[inline]
fn taps_valid(t: &Taps, valid: &[bool]) -> bool {
    t.idx.iter().zip(t.w).all(|(&i, w)| w == 0.0 || valid[i])
}

/// Fields that support bilinear lookups at real-valued coordinates.
pub trait Bilinear {
    type Value: Copy;

    fn grid(&self) -> PixelGrid;

    /// Bilinear interpolation of the surrounding pixels. Valid only if every
    /// neighbor with nonzero weight is in bounds and valid.
    fn sample(&self, x: f64, y: f64) -> Sample<Self::Value>;
}

/// Free-function form of [`Bilinear::sample`].
pub fn bilinear_sample<F: Bilinear>(field: &F, x: f64, y: f64) -> Sample<F::Value> {
    field.sample(x, y)
}

fn zero_invalid(values: &mut [f64], valid: &[bool]) {
    for (v, &ok) in values.iter_mut().zip(valid) {
        if !ok {
            *v = 0.0;
        }
    }
}

fn check_len(what: &str, got: usize, grid: PixelGrid) -> Result<()> {
    if got != grid.len() {
        return Err(Error::InvalidParameter(format!(
            "{what} has {got} entries, expected {}",
            grid.len()
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Image
// ---------------------------------------------------------------------------

/// Row-major image with 1 or 3 channels and intensities in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    grid: PixelGrid,
    channels: usize,
    data: Vec<f32>,
    valid: Vec<bool>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        let grid = PixelGrid::new(width, height);
        let valid = vec![true; grid.len()];
        Self::with_mask(grid, channels, data, valid)
    }

    pub fn with_mask(
        grid: PixelGrid,
        channels: usize,
        mut data: Vec<f32>,
        valid: Vec<bool>,
    ) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidParameter(format!(
                "image must have 1 or 3 channels, got {channels}"
            )));
        }
        check_len(
            "image data",
            data.len(),
            PixelGrid::new(grid.width * channels, grid.height),
        )?;
        check_len("image mask", valid.len(), grid)?;
        if let Some(bad) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidParameter(format!(
                "image intensity {bad} outside [0, 1]"
            )));
        }
        for (px, &ok) in data.chunks_mut(channels).zip(&valid) {
            if !ok {
                px.fill(0.0);
            }
        }
        Ok(Image {
            grid,
            channels,
            data,
            valid,
        })
    }

    /// Builds a fully valid image; `f(x, y, c)` is clamped into `[0, 1]`.
    pub fn from_fn(
        grid: PixelGrid,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Self {
        assert!(channels == 1 || channels == 3);
        let mut data = Vec::with_capacity(grid.len() * channels);
        for y in 0..grid.height {
            for x in 0..grid.width {
                for c in 0..channels {
                    data.push(f(x, y, c).clamp(0.0, 1.0));
                }
            }
        }
        Image {
            grid,
            channels,
            data,
            valid: vec![true; grid.len()],
        }
    }

    pub fn grid(&self) -> PixelGrid {
        self.grid
    }

    pub fn width(&self) -> usize {
        self.grid.width
    }

    pub fn height(&self) -> usize {
        self.grid.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[f32] {
        let i = self.grid.index(x, y) * self.channels;
        &self.data[i..i + self.channels]
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }
}

impl Bilinear for Image {
    type Value = [f32; 3];

    fn grid(&self) -> PixelGrid {
        self.grid
    }

    fn sample(&self, x: f64, y: f64) -> Sample<[f32; 3]> {
        let mut value = [0.0f32; 3];
        let Some(t) = taps(self.grid, x, y) else {
            return Sample {
                value,
                valid: false,
            };
        };
        if !taps_valid(&t, &self.valid) {
            return Sample {
                value,
                valid: false,
            };
        }
        let c = self.channels;
        for (ch, out) in value.iter_mut().enumerate().take(c) {
            let mut acc = 0.0f64;
            for k in 0..4 {
                if t.w[k] != 0.0 {
                    acc += t.w[k] * self.data[t.idx[k] * c + ch] as f64;
                }
            }
            *out = acc as f32;
        }
        Sample { value, valid: true }
    }
}

// ---------------------------------------------------------------------------
// ScalarField
// ---------------------------------------------------------------------------

/// Single-channel real field (depth in meters or disparity in pixels).
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: PixelGrid,
    values: Vec<f64>,
    valid: Vec<bool>,
}

impl ScalarField {
    /// Non-finite values are marked invalid.
    pub fn new(grid: PixelGrid, mut values: Vec<f64>, mut valid: Vec<bool>) -> Result<Self> {
        check_len("scalar values", values.len(), grid)?;
        check_len("scalar mask", valid.len(), grid)?;
        for (v, ok) in values.iter().zip(valid.iter_mut()) {
            if !v.is_finite() {
                *ok = false;
            }
        }
        zero_invalid(&mut values, &valid);
        Ok(ScalarField {
            grid,
            values,
            valid,
        })
    }

    pub fn from_fn(grid: PixelGrid, mut f: impl FnMut(usize, usize) -> Option<f64>) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        let mut valid = Vec::with_capacity(grid.len());
        for y in 0..grid.height {
            for x in 0..grid.width {
                match f(x, y) {
                    Some(v) if v.is_finite() => {
                        values.push(v);
                        valid.push(true);
                    }
                    _ => {
                        values.push(0.0);
                        valid.push(false);
                    }
                }
            }
        }
        ScalarField {
            grid,
            values,
            valid,
        }
    }

    pub fn constant(grid: PixelGrid, value: f64) -> Self {
        Self::from_fn(grid, |_, _| Some(value))
    }

    pub fn grid(&self) -> PixelGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    pub fn get(&self, x: usize, y: usize) -> Option<f64> {
        let i = self.grid.index(x, y);
        self.valid[i].then(|| self.values[i])
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    /// Valid values, in row-major order.
    pub fn valid_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.values
            .iter()
            .zip(&self.valid)
            .filter_map(|(v, ok)| ok.then_some(*v))
    }

    /// Median of the valid values, `None` if there are none.
    pub fn median(&self) -> Option<f64> {
        let mut vals: Vec<f64> = self.valid_values().collect();
        if vals.is_empty() {
            return None;
        }
        vals.sort_by(f64::total_cmp);
        Some(vals[vals.len() / 2])
    }
}

impl Bilinear for ScalarField {
    type Value = f64;

    fn grid(&self) -> PixelGrid {
        self.grid
    }

    fn sample(&self, x: f64, y: f64) -> Sample<f64> {
        match taps(self.grid, x, y) {
            Some(t) if taps_valid(&t, &self.valid) => {
                let mut acc = 0.0;
                for k in 0..4 {
                    if t.w[k] != 0.0 {
                        acc += t.w[k] * self.values[t.idx[k]];
                    }
                }
                Sample {
                    value: acc,
                    valid: true,
                }
            }
            _ => Sample {
                value: 0.0,
                valid: false,
            },
        }
    }
}

// ---------------------------------------------------------------------------
// FlowField
// ---------------------------------------------------------------------------

/// Dense two-channel displacement field `(u, v)` in pixels.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowField {
    grid: PixelGrid,
    u: Vec<f64>,
    v: Vec<f64>,
    valid: Vec<bool>,
}

impl FlowField {
    /// Pixels with non-finite components are marked invalid.
    pub fn new(
        grid: PixelGrid,
        mut u: Vec<f64>,
        mut v: Vec<f64>,
        mut valid: Vec<bool>,
    ) -> Result<Self> {
        check_len("flow u", u.len(), grid)?;
        check_len("flow v", v.len(), grid)?;
        check_len("flow mask", valid.len(), grid)?;
        for i in 0..grid.len() {
            if !(u[i].is_finite() && v[i].is_finite()) {
                valid[i] = false;
            }
        }
        zero_invalid(&mut u, &valid);
        zero_invalid(&mut v, &valid);
        Ok(FlowField { grid, u, v, valid })
    }

    pub fn from_fn(grid: PixelGrid, mut f: impl FnMut(f64, f64) -> Option<(f64, f64)>) -> Self {
        let n = grid.len();
        let mut u = Vec::with_capacity(n);
        let mut v = Vec::with_capacity(n);
        let mut valid = Vec::with_capacity(n);
        for (_, x, y) in grid.pixels() {
            match f(x, y) {
                Some((a, b)) if a.is_finite() && b.is_finite() => {
                    u.push(a);
                    v.push(b);
                    valid.push(true);
                }
                _ => {
                    u.push(0.0);
                    v.push(0.0);
                    valid.push(false);
                }
            }
        }
        FlowField { grid, u, v, valid }
    }

    pub fn zeros(grid: PixelGrid) -> Self {
        Self::constant(grid, 0.0, 0.0)
    }

    pub fn constant(grid: PixelGrid, u: f64, v: f64) -> Self {
        Self::from_fn(grid, |_, _| Some((u, v)))
    }

    pub fn grid(&self) -> PixelGrid {
        self.grid
    }

    pub fn width(&self) -> usize {
        self.grid.width
    }

    pub fn height(&self) -> usize {
        self.grid.height
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    pub fn get(&self, x: usize, y: usize) -> Option<(f64, f64)> {
        self.get_index(self.grid.index(x, y))
    }

    #[inline]
    pub fn get_index(&self, i: usize) -> Option<(f64, f64)> {
        self.valid[i].then(|| (self.u[i], self.v[i]))
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    /// Fraction of pixels that are valid.
    pub fn coverage(&self) -> f64 {
        if self.grid.is_empty() {
            return 0.0;
        }
        self.valid_count() as f64 / self.grid.len() as f64
    }

    /// Largest `|u|` or `|v|` over valid pixels.
    pub fn max_abs(&self) -> f64 {
        (0..self.grid.len())
            .filter_map(|i| self.get_index(i))
            .fold(0.0f64, |m, (u, v)| m.max(u.abs()).max(v.abs()))
    }

    /// Returns a copy with `mask` intersected into the validity mask.
    pub fn masked(&self, mask: &[bool]) -> Self {
        let valid: Vec<bool> = self.valid.iter().zip(mask).map(|(a, b)| *a && *b).collect();
        let mut out = FlowField {
            grid: self.grid,
            u: self.u.clone(),
            v: self.v.clone(),
            valid,
        };
        zero_invalid(&mut out.u, &out.valid);
        zero_invalid(&mut out.v, &out.valid);
        out
    }

    /// Scales every displacement by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.u.iter_mut().for_each(|u| *u *= factor);
        out.v.iter_mut().for_each(|v| *v *= factor);
        out
    }

    /// Marks pixels violating `|u| <= 2*width`, `|v| <= 2*height` as invalid
    /// and returns how many were dropped.
    pub fn enforce_sanity_bound(&mut self) -> usize {
        let (bu, bv) = (2.0 * self.grid.width as f64, 2.0 * self.grid.height as f64);
        let mut dropped = 0;
        for i in 0..self.grid.len() {
            if self.valid[i] && (self.u[i].abs() > bu || self.v[i].abs() > bv) {
                self.valid[i] = false;
                self.u[i] = 0.0;
                self.v[i] = 0.0;
                dropped += 1;
            }
        }
        dropped
    }
}

impl Bilinear for FlowField {
    type Value = (f64, f64);

    fn grid(&self) -> PixelGrid {
        self.grid
    }

    fn sample(&self, x: f64, y: f64) -> Sample<(f64, f64)> {
        match taps(self.grid, x, y) {
            Some(t) if taps_valid(&t, &self.valid) => {
                let (mut su, mut sv) = (0.0, 0.0);
                for k in 0..4 {
                    if t.w[k] != 0.0 {
                        su += t.w[k] * self.u[t.idx[k]];
                        sv += t.w[k] * self.v[t.idx[k]];
                    }
                }
                Sample {
                    value: (su, sv),
                    valid: true,
                }
            }
            _ => Sample {
                value: (0.0, 0.0),
                valid: false,
            },
        }
    }
}

// ---------------------------------------------------------------------------
// Backward sampling and composition
// ---------------------------------------------------------------------------

/// `W⁻¹(alpha, beta)`: the field `beta` looked up at `x + alpha(x)`.
pub fn backward_sample(alpha: &FlowField, beta: &FlowField) -> Result<FlowField> {
    alpha.grid.ensure_same(&beta.grid)?;
    let grid = alpha.grid;
    Ok(FlowField::from_fn(grid, |x, y| {
        let i = grid.index(x as usize, y as usize);
        let (du, dv) = alpha.get_index(i)?;
        let s = beta.sample(x + du, y + dv);
        s.valid.then_some(s.value)
    }))
}

/// Scalar counterpart of [`backward_sample`].
pub fn backward_sample_scalar(alpha: &FlowField, field: &ScalarField) -> Result<ScalarField> {
    alpha.grid.ensure_same(&field.grid)?;
    let grid = alpha.grid;
    Ok(ScalarField::from_fn(grid, |x, y| {
        let (du, dv) = alpha.get(x, y)?;
        let s = field.sample(x as f64 + du, y as f64 + dv);
        s.valid.then_some(s.value)
    }))
}

/// Chains two flows: `first + W⁻¹(first, second)`.
///
/// `first` maps frame A to frame B, `second` maps frame B to frame C; the
/// result maps A to C.
pub fn compose_flows(first: &FlowField, second: &FlowField) -> Result<FlowField> {
    let looked_up = backward_sample(first, second)?;
    let grid = first.grid;
    let mut u = vec![0.0; grid.len()];
    let mut v = vec![0.0; grid.len()];
    for i in 0..grid.len() {
        if looked_up.valid[i] {
            u[i] = first.u[i] + looked_up.u[i];
            v[i] = first.v[i] + looked_up.v[i];
        }
    }
    FlowField::new(grid, u, v, looked_up.valid)
}
