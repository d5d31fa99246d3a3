//! SLIC superpixels in CIELAB + position space.
//!
//! Clusters start on a near-square lattice of `target_segments` cells, are
//! nudged to the lowest-gradient pixel of their 3x3 neighbourhood, then refined
//! by local k-means with distance `sqrt(d_lab^2 + (d_xy / S)^2 * m^2)`, where
//! `S = sqrt(pixels / n)` and `m` is the compactness. A final pass splits
//! disconnected labels and merges fragments smaller than
//! `min_segment_fraction * pixels / n` into the neighbour sharing the longest
//! border.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{RgbImage, SegmentMap};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SlicParams {
    pub target_segments: usize,
    pub compactness: f64,
    pub max_iterations: usize,
    pub min_segment_fraction: f64,
}

impl Default for SlicParams {
    fn default() -> Self {
        Self {
            target_segments: 200,
            compactness: 20.0,
            max_iterations: 10,
            min_segment_fraction: 0.25,
        }
    }
}

impl SlicParams {
    pub fn with_segments(target_segments: usize) -> Self {
        Self {
            target_segments,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.target_segments == 0 {
            return Err(Error::param("target_segments must be >= 1"));
        }
        if !(self.compactness > 0.0) || !self.compactness.is_finite() {
            return Err(Error::param("compactness must be > 0"));
        }
        if self.max_iterations == 0 {
            return Err(Error::param("max_iterations must be >= 1"));
        }
        if !(self.min_segment_fraction > 0.0 && self.min_segment_fraction < 1.0) {
            return Err(Error::param("min_segment_fraction must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// 8-bit sRGB to CIELAB (D65 white).
pub fn srgb_to_lab(rgb: [u8; 3]) -> [f64; 3] {
    fn lin(c: u8) -> f64 {
        let c = c as f64 / 255.0;
        if c <= 0.04045 {
            c / 12.92
        } else {
            ((c + 0.055) / 1.055).powf(2.4)
        }
    }
    fn f(t: f64) -> f64 {
        const D: f64 = 6.0 / 29.0;
        if t > D * D * D {
            t.cbrt()
        } else {
            t / (3.0 * D * D) + 4.0 / 29.0
        }
    }
    let (r, g, b) = (lin(rgb[0]), lin(rgb[1]), lin(rgb[2]));
    let x = 0.412_456_4 * r + 0.357_576_1 * g + 0.180_437_5 * b;
    let y = 0.212_672_9 * r + 0.715_152_2 * g + 0.072_175_0 * b;
    let z = 0.019_333_9 * r + 0.119_192_0 * g + 0.950_304_1 * b;
    let (fx, fy, fz) = (f(x / 0.950_47), f(y), f(z / 1.088_83));
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

fn to_lab_image(image: &RgbImage) -> Vec<[f64; 3]> {
    let mut cache: HashMap<[u8; 3], [f64; 3]> = HashMap::new();
    image
        .pixels()
        .chunks_exact(3)
        .map(|p| {
            let key = [p[0], p[1], p[2]];
            *cache.entry(key).or_insert_with(|| srgb_to_lab(key))
        })
        .collect()
}

/// Rows and columns of a near-square, aspect-preserving lattice with about `n` cells.
pub(crate) fn lattice_shape(width: usize, height: usize, n: usize) -> (usize, usize) {
    let rows = ((n as f64 * height as f64 / width as f64).sqrt().round() as usize).clamp(1, height.min(n));
    let cols = ((n as f64 / rows as f64).round() as usize).clamp(1, width);
    (rows, cols)
}

#[derive(Debug, Clone, Copy)]
struct Center {
    lab: [f64; 3],
    x: f64,
    y: f64,
}

/// Lattice of initial cluster positions (integer pixel coordinates): `n`
/// positions when `n` fits, rows differing by at most one column.
pub fn initial_lattice(width: usize, height: usize, n: usize) -> Vec<(usize, usize)> {
    let (rows, _) = lattice_shape(width, height, n);
    let mut out = Vec::with_capacity(n);
    for r in 0..rows {
        let y = (2 * r + 1) * height / (2 * rows);
        let cols = (n * (r + 1) / rows - n * r / rows).clamp(1, width);
        for c in 0..cols {
            let x = (2 * c + 1) * width / (2 * cols);
            out.push((x, y));
        }
    }
    out
}

fn lab_dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let d0 = a[0] - b[0];
    let d1 = a[1] - b[1];
    let d2 = a[2] - b[2];
    d0 * d0 + d1 * d1 + d2 * d2
}

/// Over-segments `image` into about `params.target_segments` compact superpixels.
pub fn slic_segment(image: &RgbImage, params: &SlicParams) -> Result<SegmentMap> {
    params.validate()?;
    let (w, h) = (image.width(), image.height());
    let pixels = w * h;
    let n = params.target_segments;
    if n > pixels {
        return Err(Error::BudgetExceedsPixels {
            requested: n,
            pixels,
        });
    }
    let lab = to_lab_image(image);
    let step = (pixels as f64 / n as f64).sqrt();

    let mut centers: Vec<Center> = initial_lattice(w, h, n)
        .into_iter()
        .map(|(x, y)| {
            let (x, y) = if step >= 4.0 {
                lowest_gradient(&lab, w, h, x, y)
            } else {
                (x, y)
            };
            Center {
                lab: lab[y * w + x],
                x: x as f64,
                y: y as f64,
            }
        })
        .collect();

    let spatial_weight = (params.compactness / step).powi(2);
    let mut labels = vec![0u32; pixels];
    for iter in 0..params.max_iterations {
        let grid = BucketGrid::new(&centers, w, h, step);
        let next: Vec<u32> = {
            let mut buf = vec![0u32; pixels];
            buf.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
                let mut candidates = Vec::with_capacity(16);
                for (x, out) in row.iter_mut().enumerate() {
                    let p = &lab[y * w + x];
                    grid.candidates(x as f64, y as f64, &mut candidates);
                    let mut best = (f64::INFINITY, u32::MAX);
                    let consider = |best: &mut (f64, u32), k: u32, windowed: bool| {
                        let c = &centers[k as usize];
                        let dx = c.x - x as f64;
                        let dy = c.y - y as f64;
                        if windowed && (dx.abs() > step || dy.abs() > step) {
                            return;
                        }
                        let d = lab_dist2(p, &c.lab) + (dx * dx + dy * dy) * spatial_weight;
                        if d < best.0 || (d == best.0 && k < best.1) {
                            *best = (d, k);
                        }
                    };
                    for &k in &candidates {
                        consider(&mut best, k, true);
                    }
                    if best.1 == u32::MAX {
                        for &k in &candidates {
                            consider(&mut best, k, false);
                        }
                    }
                    if best.1 == u32::MAX {
                        for k in 0..centers.len() as u32 {
                            consider(&mut best, k, false);
                        }
                    }
                    *out = best.1;
                }
            });
            buf
        };
        let changed = iter == 0 || next != labels;
        labels = next;

        let mut sums = vec![[0.0f64; 6]; centers.len()];
        for (i, &l) in labels.iter().enumerate() {
            let s = &mut sums[l as usize];
            let p = &lab[i];
            s[0] += p[0];
            s[1] += p[1];
            s[2] += p[2];
            s[3] += (i % w) as f64;
            s[4] += (i / w) as f64;
            s[5] += 1.0;
        }
        for (c, s) in centers.iter_mut().zip(&sums) {
            if s[5] > 0.0 {
                c.lab = [s[0] / s[5], s[1] / s[5], s[2] / s[5]];
                c.x = s[3] / s[5];
                c.y = s[4] / s[5];
            }
        }
        if !changed {
            break;
        }
    }

    let min_size = params.min_segment_fraction * pixels as f64 / n as f64;
    let map = enforce_connectivity(w, h, &labels, min_size)?;
    debug_assert!(map.is_connected());
    Ok(map)
}

fn lowest_gradient(lab: &[[f64; 3]], w: usize, h: usize, cx: usize, cy: usize) -> (usize, usize) {
    let grad = |x: usize, y: usize| -> f64 {
        let xl = x.saturating_sub(1);
        let xr = (x + 1).min(w - 1);
        let yu = y.saturating_sub(1);
        let yd = (y + 1).min(h - 1);
        lab_dist2(&lab[y * w + xr], &lab[y * w + xl]) + lab_dist2(&lab[yd * w + x], &lab[yu * w + x])
    };
    let mut best = (grad(cx, cy), cx, cy);
    for dy in -1i64..=1 {
        for dx in -1i64..=1 {
            let (x, y) = (cx as i64 + dx, cy as i64 + dy);
            if x < 0 || y < 0 || x >= w as i64 || y >= h as i64 {
                continue;
            }
            let g = grad(x as usize, y as usize);
            if g < best.0 {
                best = (g, x as usize, y as usize);
            }
        }
    }
    (best.1, best.2)
}

/// Cluster centers bucketed into cells of side `step` for window lookups.
struct BucketGrid {
    cell: f64,
    bw: usize,
    bh: usize,
    buckets: Vec<Vec<u32>>,
}

impl BucketGrid {
    fn new(centers: &[Center], w: usize, h: usize, step: f64) -> Self {
        let cell = step.max(1.0);
        let bw = (w as f64 / cell).ceil() as usize + 1;
        let bh = (h as f64 / cell).ceil() as usize + 1;
        let mut buckets = vec![Vec::new(); bw * bh];
        for (k, c) in centers.iter().enumerate() {
            let bx = ((c.x / cell) as usize).min(bw - 1);
            let by = ((c.y / cell) as usize).min(bh - 1);
            buckets[by * bw + bx].push(k as u32);
        }
        Self {
            cell,
            bw,
            bh,
            buckets,
        }
    }

    fn candidates(&self, x: f64, y: f64, out: &mut Vec<u32>) {
        out.clear();
        let bx = ((x / self.cell) as usize).min(self.bw - 1);
        let by = ((y / self.cell) as usize).min(self.bh - 1);
        for yy in by.saturating_sub(1)..=(by + 1).min(self.bh - 1) {
            for xx in bx.saturating_sub(1)..=(bx + 1).min(self.bw - 1) {
                out.extend_from_slice(&self.buckets[yy * self.bw + xx]);
            }
        }
    }
}

/// Splits labels into 4-connected components and merges every component
/// smaller than `min_size` into the neighbour sharing the longest border
/// (ties: larger neighbour, then lower component id).
pub(crate) fn enforce_connectivity(
    w: usize,
    h: usize,
    labels: &[u32],
    min_size: f64,
) -> Result<SegmentMap> {
    let cc = SegmentMap::connected_components(w, h, labels)?;
    let n = cc.num_segments();
    let comp = cc.labels();
    let mut size: Vec<usize> = cc.sizes();
    let mut adj: Vec<HashMap<u32, usize>> = vec![HashMap::new(); n];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let a = comp[i];
            if x + 1 < w && comp[i + 1] != a {
                *adj[a as usize].entry(comp[i + 1]).or_default() += 1;
                *adj[comp[i + 1] as usize].entry(a).or_default() += 1;
            }
            if y + 1 < h && comp[i + w] != a {
                *adj[a as usize].entry(comp[i + w]).or_default() += 1;
                *adj[comp[i + w] as usize].entry(a).or_default() += 1;
            }
        }
    }

    let mut parent: Vec<u32> = (0..n as u32).collect();
    let mut alive = vec![true; n];
    let mut remaining = n;
    loop {
        let mut small: Vec<u32> = (0..n as u32)
            .filter(|&c| alive[c as usize] && (size[c as usize] as f64) < min_size)
            .collect();
        if small.is_empty() || remaining <= 1 {
            break;
        }
        small.sort_by_key(|&c| (size[c as usize], c));
        let mut merged_any = false;
        for a in small {
            let ai = a as usize;
            if !alive[ai] || size[ai] as f64 >= min_size || remaining <= 1 {
                continue;
            }
            let target = adj[ai]
                .iter()
                .map(|(&b, &cnt)| (cnt, size[b as usize], std::cmp::Reverse(b)))
                .max()
                .map(|(_, _, std::cmp::Reverse(b))| b);
            let Some(b) = target else { continue };
            let bi = b as usize;
            let edges = std::mem::take(&mut adj[ai]);
            for (c, cnt) in edges {
                let ci = c as usize;
                adj[ci].remove(&a);
                if c != b {
                    *adj[bi].entry(c).or_default() += cnt;
                    *adj[ci].entry(b).or_default() += cnt;
                }
            }
            adj[bi].remove(&a);
            size[bi] += size[ai];
            size[ai] = 0;
            alive[ai] = false;
            parent[ai] = b;
            remaining -= 1;
            merged_any = true;
        }
        if !merged_any {
            break;
        }
    }

    fn root(parent: &[u32], mut c: u32) -> u32 {
        while parent[c as usize] != c {
            c = parent[c as usize];
        }
        c
    }
    let raw: Vec<u32> = comp.iter().map(|&c| root(&parent, c)).collect();
    SegmentMap::from_raw_labels(w, h, &raw)
}
