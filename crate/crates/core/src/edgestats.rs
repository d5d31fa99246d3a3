//! How well RGB edges predict depth discontinuities, and vice versa.
//!
//! Depth boundaries come from a threshold on the forward-difference gradient
//! divided by the depth. RGB edges come from a Sobel/non-maximum-suppression/
//! hysteresis detector on luma. Matching allows a `(2*tol+1)^2` window.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{ensure_same, DepthMap, RgbImage};

/// Sobel magnitude of a full-contrast (0 to 255) vertical step on luma.
pub const SOBEL_FULL_SCALE: f64 = 4.0 * 255.0;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundaryMap {
    width: usize,
    height: usize,
    boundary: Vec<bool>,
}

impl BoundaryMap {
    pub fn new(width: usize, height: usize, boundary: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 || boundary.len() != width * height {
            return Err(Error::InvalidData("boundary buffer does not match its dimensions".into()));
        }
        Ok(Self {
            width,
            height,
            boundary,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn boundary(&self) -> &[bool] {
        &self.boundary
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> bool {
        self.boundary[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.boundary.iter().filter(|&&b| b).count()
    }

    /// Square dilation with half side `tol` (Chebyshev radius).
    pub fn dilate(&self, tol: usize) -> BoundaryMap {
        let (w, h) = (self.width, self.height);
        let mut rows = vec![false; w * h];
        for y in 0..h {
            // sliding window count along the row
            let row = &self.boundary[y * w..(y + 1) * w];
            let mut prefix = vec![0usize; w + 1];
            for x in 0..w {
                prefix[x + 1] = prefix[x] + row[x] as usize;
            }
            for x in 0..w {
                let lo = x.saturating_sub(tol);
                let hi = (x + tol + 1).min(w);
                rows[y * w + x] = prefix[hi] > prefix[lo];
            }
        }
        let mut out = vec![false; w * h];
        for x in 0..w {
            let mut prefix = vec![0usize; h + 1];
            for y in 0..h {
                prefix[y + 1] = prefix[y] + rows[y * w + x] as usize;
            }
            for y in 0..h {
                let lo = y.saturating_sub(tol);
                let hi = (y + tol + 1).min(h);
                out[y * w + x] = prefix[hi] > prefix[lo];
            }
        }
        BoundaryMap {
            width: w,
            height: h,
            boundary: out,
        }
    }
}

/// Marks pixels where `max(|dx d|, |dy d|) / d > rel_threshold`, using
/// forward differences between valid pixels.
pub fn depth_boundaries(d: &DepthMap, rel_threshold: f64) -> Result<BoundaryMap> {
    if !(rel_threshold >= 0.0) {
        return Err(Error::param("rel_threshold must be >= 0"));
    }
    let (w, h) = d.dims();
    let depth = d.depth();
    let valid = d.valid();
    let mut out = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if !valid[i] || depth[i] <= 0.0 {
                continue;
            }
            let mut g: f64 = 0.0;
            if x + 1 < w && valid[i + 1] {
                g = g.max((depth[i + 1] - depth[i]).abs());
            }
            if y + 1 < h && valid[i + w] {
                g = g.max((depth[i + w] - depth[i]).abs());
            }
            out[i] = g / depth[i] > rel_threshold;
        }
    }
    BoundaryMap::new(w, h, out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EdgeParams {
    /// Fraction of [`SOBEL_FULL_SCALE`].
    pub high_threshold: f64,
    /// Fraction of [`SOBEL_FULL_SCALE`].
    pub low_threshold: f64,
}

impl Default for EdgeParams {
    fn default() -> Self {
        Self {
            high_threshold: 0.15,
            low_threshold: 0.05,
        }
    }
}

/// Sobel gradient on luma, non-maximum suppression along the quantized
/// gradient direction, then hysteresis (8-connected).
///
/// NMS keeps a pixel when it is strictly above the neighbour on the negative
/// side and at least the one on the positive side, so plateaus of equal
/// magnitude across a step yield a single-pixel line.
pub fn rgb_edges(image: &RgbImage, params: &EdgeParams) -> Result<BoundaryMap> {
    if !(params.low_threshold >= 0.0 && params.high_threshold >= params.low_threshold) {
        return Err(Error::param("edge thresholds need 0 <= low <= high"));
    }
    let (w, h) = (image.width(), image.height());
    let luma = image.luma();
    let at = |x: i64, y: i64| -> f64 {
        let x = x.clamp(0, w as i64 - 1) as usize;
        let y = y.clamp(0, h as i64 - 1) as usize;
        luma[y * w + x]
    };
    let mut mag = vec![0.0; w * h];
    let mut dir = vec![0u8; w * h];
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let gx = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x - 1, y) + at(x - 1, y + 1));
            let gy = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x, y - 1) + at(x + 1, y - 1));
            let i = y as usize * w + x as usize;
            mag[i] = gx.hypot(gy);
            // 0: horizontal gradient, 1: 45 deg, 2: vertical, 3: 135 deg
            let angle = gy.atan2(gx).to_degrees().rem_euclid(180.0);
            dir[i] = match angle {
                a if !(22.5..157.5).contains(&a) => 0,
                a if a < 67.5 => 1,
                a if a < 112.5 => 2,
                _ => 3,
            };
        }
    }
    let m = |x: i64, y: i64| -> f64 {
        if x < 0 || y < 0 || x >= w as i64 || y >= h as i64 {
            0.0
        } else {
            mag[y as usize * w + x as usize]
        }
    };
    let low = params.low_threshold * SOBEL_FULL_SCALE;
    let high = params.high_threshold * SOBEL_FULL_SCALE;
    // 0 none, 1 weak, 2 strong
    let mut class = vec![0u8; w * h];
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let i = y as usize * w + x as usize;
            let v = mag[i];
            if v < low || v == 0.0 {
                continue;
            }
            let (dx, dy) = match dir[i] {
                0 => (1, 0),
                1 => (1, 1),
                2 => (0, 1),
                _ => (-1, 1),
            };
            if v > m(x - dx, y - dy) && v >= m(x + dx, y + dy) {
                class[i] = if v >= high { 2 } else { 1 };
            }
        }
    }
    let mut out = vec![false; w * h];
    let mut stack: Vec<usize> = (0..w * h).filter(|&i| class[i] == 2).collect();
    for &i in &stack {
        out[i] = true;
    }
    while let Some(i) = stack.pop() {
        let (x, y) = ((i % w) as i64, (i / w) as i64);
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if class[j] == 1 && !out[j] {
                    out[j] = true;
                    stack.push(j);
                }
            }
        }
    }
    BoundaryMap::new(w, h, out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeProbabilities {
    /// Fraction of depth-boundary pixels with an RGB edge within tolerance.
    pub p_rgb_given_d: f64,
    /// Fraction of RGB-edge pixels with a depth boundary within tolerance.
    pub p_d_given_rgb: f64,
}

/// Fraction of `given` pixels with a `target` pixel inside the square window
/// of half side `tol`.
pub fn conditional_probability(target: &BoundaryMap, given: &BoundaryMap, tol: usize) -> Result<f64> {
    ensure_same(target.dims(), given.dims())?;
    let n = given.count();
    if n == 0 {
        return Err(Error::EmptyConditioningSet("conditioning boundary set is empty"));
    }
    let near = target.dilate(tol);
    let hits = given
        .boundary()
        .iter()
        .zip(near.boundary())
        .filter(|(&g, &t)| g && t)
        .count();
    Ok(hits as f64 / n as f64)
}

/// Both conditional hit rates with a square matching window of half side `tol`.
pub fn conditional_probabilities(b_rgb: &BoundaryMap, b_d: &BoundaryMap, tol: usize) -> Result<EdgeProbabilities> {
    ensure_same(b_rgb.dims(), b_d.dims())?;
    if b_d.count() == 0 {
        return Err(Error::EmptyConditioningSet("no depth boundary pixels"));
    }
    if b_rgb.count() == 0 {
        return Err(Error::EmptyConditioningSet("no RGB edge pixels"));
    }
    Ok(EdgeProbabilities {
        p_rgb_given_d: conditional_probability(b_rgb, b_d, tol)?,
        p_d_given_rgb: conditional_probability(b_d, b_rgb, tol)?,
    })
}

/// Overlay colors: depth-only red, RGB-only green, both blue, on dimmed luma.
pub fn overlay(image: &RgbImage, b_rgb: &BoundaryMap, b_d: &BoundaryMap) -> Result<RgbImage> {
    ensure_same((image.width(), image.height()), b_rgb.dims())?;
    ensure_same(b_rgb.dims(), b_d.dims())?;
    let luma = image.luma();
    let w = image.width();
    RgbImage::from_fn(w, image.height(), |x, y| {
        let i = y * w + x;
        match (b_d.boundary()[i], b_rgb.boundary()[i]) {
            (true, true) => [0, 0, 255],
            (true, false) => [255, 0, 0],
            (false, true) => [0, 255, 0],
            (false, false) => {
                let g = (luma[i] * 0.4) as u8;
                [g, g, g]
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(w: usize, h: usize, pts: &[(usize, usize)]) -> BoundaryMap {
        let mut b = vec![false; w * h];
        for &(x, y) in pts {
            b[y * w + x] = true;
        }
        BoundaryMap::new(w, h, b).unwrap()
    }

    #[test]
    fn constant_depth_has_no_boundary() {
        let d = DepthMap::constant(8, 6, 4.0).unwrap();
        assert_eq!(depth_boundaries(&d, 0.05).unwrap().count(), 0);
    }

    #[test]
    fn depth_step_marks_the_step_column() {
        // 5 m for x < 4, 10 m from x = 4: |10 - 5| / 5 = 1 > 0.1 at x = 3 only
        let d = DepthMap::from_fn(9, 5, |x, _| if x < 4 { 5.0 } else { 10.0 }).unwrap();
        let b = depth_boundaries(&d, 0.1).unwrap();
        for y in 0..5 {
            for x in 0..9 {
                assert_eq!(b.at(x, y), x == 3, "({x},{y})");
            }
        }
    }

    #[test]
    fn gentle_ramp_is_not_a_boundary() {
        // slope 0.1 m/px at depth >= 5 m: ratio <= 0.02 < 0.05
        let d = DepthMap::from_fn(30, 4, |x, _| 5.0 + 0.1 * x as f64).unwrap();
        assert_eq!(depth_boundaries(&d, 0.05).unwrap().count(), 0);
    }

    #[test]
    fn invalid_neighbours_are_skipped() {
        let d = DepthMap::new(3, 1, vec![5.0, 0.0, 5.0], vec![true, false, true]).unwrap();
        assert_eq!(depth_boundaries(&d, 0.01).unwrap().count(), 0);
    }

    #[test]
    fn uniform_image_has_no_edges() {
        let img = RgbImage::filled(12, 9, [90, 120, 30]).unwrap();
        assert_eq!(rgb_edges(&img, &EdgeParams::default()).unwrap().count(), 0);
    }

    #[test]
    fn two_tone_split_gives_a_single_line() {
        let img = RgbImage::from_fn(16, 10, |x, _| if x < 7 { [30, 30, 30] } else { [220, 220, 220] }).unwrap();
        let e = rgb_edges(&img, &EdgeParams::default()).unwrap();
        for y in 0..10 {
            let cols: Vec<usize> = (0..16).filter(|&x| e.at(x, y)).collect();
            assert_eq!(cols, vec![6], "row {y}");
        }
    }

    #[test]
    fn faint_noise_is_ignored() {
        // +-3 levels of noise: Sobel magnitude stays far below 5% of full scale
        let img = RgbImage::from_fn(20, 20, |x, y| {
            let n = ((x * 7919 + y * 104_729) % 7) as u8;
            [120 + n, 120 + n, 120 + n]
        })
        .unwrap();
        assert_eq!(rgb_edges(&img, &EdgeParams::default()).unwrap().count(), 0);
    }

    #[test]
    fn probability_examples() {
        let a = map(10, 10, &[(2, 2), (3, 2), (4, 2)]);
        let p = conditional_probabilities(&a, &a, 2).unwrap();
        assert_eq!((p.p_rgb_given_d, p.p_d_given_rgb), (1.0, 1.0));
        let far = map(10, 10, &[(8, 8)]);
        let p = conditional_probabilities(&a, &far, 2).unwrap();
        assert_eq!((p.p_rgb_given_d, p.p_d_given_rgb), (0.0, 0.0));
        // (4,2) -> (6,4) is exactly at Chebyshev distance 2
        let near = map(10, 10, &[(6, 4)]);
        let p = conditional_probabilities(&a, &near, 2).unwrap();
        assert_eq!((p.p_rgb_given_d, p.p_d_given_rgb), (1.0, 1.0 / 3.0));
    }

    #[test]
    fn empty_conditioning_set() {
        let a = map(4, 4, &[(1, 1)]);
        let none = map(4, 4, &[]);
        assert!(conditional_probabilities(&a, &none, 2).is_err());
        assert!(conditional_probabilities(&none, &a, 2).is_err());
    }

    #[test]
    fn overlay_colors() {
        let img = RgbImage::filled(3, 1, [100, 100, 100]).unwrap();
        let rgb = map(3, 1, &[(0, 0), (1, 0)]);
        let d = map(3, 1, &[(1, 0), (2, 0)]);
        let o = overlay(&img, &rgb, &d).unwrap();
        assert_eq!(o.get(0, 0), [0, 255, 0]);
        assert_eq!(o.get(1, 0), [0, 0, 255]);
        assert_eq!(o.get(2, 0), [255, 0, 0]);
    }
}
