//! Sector-star test chart with binary depth, and resolution curves measured
//! on reconstructions of it.
//!
//! Near sectors carry a foreground texture, far sectors a background one, so
//! image-guided samplers see the same edges that separate the depth levels.
//! Along a circle of radius `r` the depth is a square wave with `sectors / 2`
//! periods, i.e. `sectors / (4 pi r)` cycles per pixel.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{DepthMap, RgbImage};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChartParams {
    pub size: usize,
    pub sectors: usize,
    pub near_m: f64,
    pub far_m: f64,
    pub texture_seed: u64,
}

impl Default for ChartParams {
    fn default() -> Self {
        Self {
            size: 1000,
            sectors: 72,
            near_m: 5.0,
            far_m: 20.0,
            texture_seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct StarChart {
    pub rgb: RgbImage,
    pub depth: DepthMap,
    pub params: ChartParams,
    pub center: (f64, f64),
    /// Radius of the star disk in pixels.
    pub radius: f64,
}

impl StarChart {
    pub fn sectors(&self) -> usize {
        self.params.sectors
    }

    /// Cycles per pixel along the circle of radius `r`.
    pub fn frequency_at(&self, r: f64) -> f64 {
        self.params.sectors as f64 / (4.0 * PI * r)
    }

    /// `count` log-spaced radii from `0.95 * radius` down to the circle where
    /// the chart reaches 0.25 cycles per pixel, largest first.
    pub fn default_radii(&self, count: usize) -> Vec<f64> {
        log_spaced(self.params.sectors as f64 / PI, 0.95 * self.radius, count)
    }
}

pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![hi],
        _ => (0..count)
            .map(|i| {
                let t = i as f64 / (count - 1) as f64;
                (hi.ln() + t * (lo.ln() - hi.ln())).exp()
            })
            .collect(),
    }
}

/// Smooth value noise: random lattice values every `cell` pixels, bilinearly
/// interpolated.
struct ValueNoise {
    cols: usize,
    cell: f64,
    lattice: Vec<f64>,
}

impl ValueNoise {
    fn new(size: usize, cell: f64, rng: &mut ChaCha8Rng) -> Self {
        let cols = (size as f64 / cell).ceil() as usize + 2;
        let lattice = (0..cols * cols).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        Self { cols, cell, lattice }
    }

    fn at(&self, x: f64, y: f64) -> f64 {
        let (u, v) = (x / self.cell, y / self.cell);
        let (i, j) = (u.floor() as usize, v.floor() as usize);
        let (fu, fv) = (u - i as f64, v - j as f64);
        let l = |a: usize, b: usize| self.lattice[b * self.cols + a];
        let top = l(i, j) * (1.0 - fu) + l(i + 1, j) * fu;
        let bottom = l(i, j + 1) * (1.0 - fu) + l(i + 1, j + 1) * fu;
        top * (1.0 - fv) + bottom * fv
    }
}

fn shade(base: [f64; 3], delta: f64) -> [u8; 3] {
    base.map(|c| (c + delta).round().clamp(0.0, 255.0) as u8)
}

/// Builds the chart. Even sectors (counted counter-clockwise from +x, with y
/// pointing down) are near, odd sectors and the area outside the disk are far.
pub fn generate_chart(params: &ChartParams) -> Result<StarChart> {
    let ChartParams {
        size,
        sectors,
        near_m,
        far_m,
        texture_seed,
    } = *params;
    if sectors < 8 || sectors % 2 != 0 {
        return Err(Error::param("sectors must be even and >= 8"));
    }
    if size < 8 * sectors {
        return Err(Error::param(format!("size must be >= 8 * sectors = {}", 8 * sectors)));
    }
    if !(near_m > 0.0 && far_m > near_m && far_m.is_finite()) {
        return Err(Error::param("need 0 < near_m < far_m"));
    }
    let c = (size as f64 - 1.0) / 2.0;
    let radius = size as f64 / 2.0 - 1.0;
    let mut rng = ChaCha8Rng::seed_from_u64(texture_seed);
    let fg_coarse = ValueNoise::new(size, 24.0, &mut rng);
    let fg_fine = ValueNoise::new(size, 5.0, &mut rng);
    let bg_coarse = ValueNoise::new(size, 40.0, &mut rng);
    let bg_fine = ValueNoise::new(size, 7.0, &mut rng);
    // warm foreground, cool darker background; mean luma about 168 vs 92
    let fg_base = [215.0, 150.0, 95.0];
    let bg_base = [60.0, 105.0, 120.0];

    let near_at = |x: usize, y: usize| -> bool {
        let (dx, dy) = (x as f64 - c, y as f64 - c);
        if dx.hypot(dy) > radius {
            return false;
        }
        let theta = (-dy).atan2(dx).rem_euclid(2.0 * PI);
        let k = ((theta * sectors as f64 / (2.0 * PI)).floor() as usize).min(sectors - 1);
        k.is_multiple_of(2)
    };
    let mut depth = Vec::with_capacity(size * size);
    let mut rgb = Vec::with_capacity(3 * size * size);
    for y in 0..size {
        for x in 0..size {
            let (fx, fy) = (x as f64, y as f64);
            if near_at(x, y) {
                depth.push(near_m);
                let t = 22.0 * fg_coarse.at(fx, fy) + 10.0 * fg_fine.at(fx, fy);
                rgb.extend(shade(fg_base, t));
            } else {
                depth.push(far_m);
                let t = 18.0 * bg_coarse.at(fx, fy) + 8.0 * bg_fine.at(fx, fy);
                rgb.extend(shade(bg_base, t));
            }
        }
    }
    Ok(StarChart {
        rgb: RgbImage::new(size, size, rgb)?,
        depth: DepthMap::dense(size, size, depth)?,
        params: *params,
        center: (c, c),
        radius,
    })
}

/// Point on the resolution curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MtfPoint {
    pub radius: f64,
    pub frequency_cpp: f64,
    /// Fundamental amplitude relative to the ideal square wave of the depth step.
    pub modulation: f64,
    pub mtf: f64,
}

/// Modulation below which a curve is not normalized (nothing to normalize by).
const MIN_REFERENCE_MODULATION: f64 = 0.05;

fn bilinear(d: &DepthMap, x: f64, y: f64) -> f64 {
    let (w, h) = d.dims();
    let x = x.clamp(0.0, (w - 1) as f64);
    let y = y.clamp(0.0, (h - 1) as f64);
    let (x0, y0) = (x.floor() as usize, y.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
    let (fx, fy) = (x - x0 as f64, y - y0 as f64);
    let top = d.at(x0, y0) * (1.0 - fx) + d.at(x1, y0) * fx;
    let bottom = d.at(x0, y1) * (1.0 - fx) + d.at(x1, y1) * fx;
    top * (1.0 - fy) + bottom * fy
}

/// Complex coefficient of harmonic `k` of `d` sampled along a circle.
fn fundamental(d: &DepthMap, center: (f64, f64), r: f64, k: usize, samples: usize) -> (f64, f64) {
    let (mut re, mut im) = (0.0, 0.0);
    for i in 0..samples {
        let t = 2.0 * PI * (i as f64 + 0.5) / samples as f64;
        let v = bilinear(d, center.0 + r * t.cos(), center.1 - r * t.sin());
        let phase = k as f64 * t;
        re += v * phase.cos();
        im += v * phase.sin();
    }
    let s = 2.0 / samples as f64;
    (re * s, im * s)
}

/// Resolution curve of `recon` on `chart`, sorted by increasing frequency.
///
/// For each radius the reconstruction is read bilinearly along the circle
/// (16 reads per sector, at least one per 0.5 px of arc) and the amplitude of
/// the `sectors / 2` harmonic is taken. Dividing by the ideal square-wave
/// amplitude `(4 / pi) * (far - near) / 2` gives the modulation. The ground
/// truth read the same way falls short of that ideal because the binary
/// chart is rasterized and read bilinearly; its measured modulation is used
/// as the reference, so the ground truth itself scores exactly 1. The curve
/// is finally normalized by its value at the largest radius unless that
/// value is near zero.
pub fn compute_mtf(chart: &StarChart, recon: &DepthMap, radii: &[f64]) -> Result<Vec<MtfPoint>> {
    crate::types::ensure_same(chart.depth.dims(), recon.dims())?;
    if !recon.is_fully_valid() {
        return Err(Error::InvalidData("reconstruction must be fully valid".into()));
    }
    if radii.is_empty() {
        return Err(Error::param("at least one radius is required"));
    }
    for &r in radii {
        if !(r > 0.0) || r > chart.radius {
            return Err(Error::RadiusOutOfRange {
                radius: r,
                max: chart.radius,
            });
        }
    }
    let sectors = chart.sectors();
    let k = sectors / 2;
    let ideal = (4.0 / PI) * (chart.params.far_m - chart.params.near_m) / 2.0;
    let mut points: Vec<MtfPoint> = radii
        .par_iter()
        .map(|&r| {
            let n = (16 * sectors).max((4.0 * PI * r).ceil() as usize);
            let (gr, gi) = fundamental(&chart.depth, chart.center, r, k, n);
            let (rr, ri) = fundamental(recon, chart.center, r, k, n);
            let reference = gr.hypot(gi) / ideal;
            let modulation = rr.hypot(ri) / ideal;
            MtfPoint {
                radius: r,
                frequency_cpp: chart.frequency_at(r),
                modulation,
                mtf: modulation / reference,
            }
        })
        .collect();
    points.sort_by(|a, b| a.frequency_cpp.total_cmp(&b.frequency_cpp));
    let low = points[0].mtf;
    if low >= MIN_REFERENCE_MODULATION {
        for p in &mut points {
            p.mtf /= low;
        }
    }
    Ok(points)
}

pub fn write_mtf_csv(path: impl AsRef<Path>, curve: &[MtfPoint]) -> Result<()> {
    let path = path.as_ref();
    let mut text = String::from("frequency_cpp,mtf\n");
    for p in curve {
        text.push_str(&format!("{},{}\n", p.frequency_cpp, p.mtf));
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes `rgb.png`, `depth.png` (+ scale sidecar) and `chart.json`.
pub fn write_chart(dir: impl AsRef<Path>, chart: &StarChart) -> Result<()> {
    let dir = dir.as_ref();
    crate::io::write_rgb(dir.join("rgb.png"), &chart.rgb)?;
    crate::io::write_depth(dir.join("depth.png"), &chart.depth)?;
    crate::io::write_json(dir.join("chart.json"), &chart.params)
}

/// Regenerates the chart described by `chart.json`; the parameters fully
/// determine it.
pub fn read_chart(dir: impl AsRef<Path>) -> Result<StarChart> {
    let p = dir.as_ref().join("chart.json");
    let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
    let params: ChartParams = serde_json::from_str(&text)?;
    generate_chart(&params)
}

/// Separable Gaussian blur with clamped borders, truncated at 4 sigma.
pub fn gaussian_blur(d: &DepthMap, sigma: f64) -> Result<DepthMap> {
    if !(sigma > 0.0) {
        return Err(Error::param("sigma must be > 0"));
    }
    let (w, h) = d.dims();
    let r = (4.0 * sigma).ceil() as i64;
    let kernel: Vec<f64> = (-r..=r).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let norm: f64 = kernel.iter().sum();
    let kernel: Vec<f64> = kernel.iter().map(|k| k / norm).collect();
    let src = d.depth();
    let mut tmp = vec![0.0; w * h];
    tmp.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (x, o) in row.iter_mut().enumerate() {
            *o = (-r..=r)
                .map(|i| kernel[(i + r) as usize] * src[y * w + (x as i64 + i).clamp(0, w as i64 - 1) as usize])
                .sum();
        }
    });
    let mut out = vec![0.0; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (x, o) in row.iter_mut().enumerate() {
            *o = (-r..=r)
                .map(|i| kernel[(i + r) as usize] * tmp[(y as i64 + i).clamp(0, h as i64 - 1) as usize * w + x])
                .sum();
        }
    });
    DepthMap::new(w, h, out, d.valid().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> StarChart {
        generate_chart(&ChartParams {
            size: 400,
            sectors: 32,
            ..ChartParams::default()
        })
        .unwrap()
    }

    #[test]
    fn parameter_bounds() {
        let bad = [
            ChartParams { sectors: 6, ..ChartParams::default() },
            ChartParams { sectors: 73, ..ChartParams::default() },
            ChartParams { size: 500, ..ChartParams::default() },
            ChartParams { near_m: 20.0, far_m: 5.0, ..ChartParams::default() },
        ];
        for p in bad {
            assert!(generate_chart(&p).is_err(), "{p:?}");
        }
    }

    #[test]
    fn depth_alternates_half_sectors_times() {
        let chart = small();
        let (cx, cy) = chart.center;
        let r = 150.0;
        let reads: Vec<bool> = (0..4000)
            .map(|i| {
                let t = 2.0 * PI * (i as f64 + 0.25) / 4000.0;
                let x = (cx + r * t.cos()).round() as usize;
                let y = (cy - r * t.sin()).round() as usize;
                chart.depth.at(x, y) == chart.params.near_m
            })
            .collect();
        let changes = (0..reads.len()).filter(|&i| reads[i] != reads[(i + 1) % reads.len()]).count();
        // one near->far and one far->near per period
        assert_eq!(changes / 2, chart.sectors() / 2);
        let values: std::collections::BTreeSet<u64> = chart.depth.depth().iter().map(|v| v.to_bits()).collect();
        assert_eq!(values.len(), 2);
    }

    #[test]
    fn textures_differ_in_luma() {
        let chart = small();
        let luma = chart.rgb.luma();
        let (mut near, mut far) = ((0.0, 0usize), (0.0, 0usize));
        for (l, &d) in luma.iter().zip(chart.depth.depth()) {
            let acc = if d == chart.params.near_m { &mut near } else { &mut far };
            acc.0 += l;
            acc.1 += 1;
        }
        assert!(near.0 / near.1 as f64 - far.0 / far.1 as f64 >= 40.0);
    }

    #[test]
    fn deterministic_per_seed() {
        let a = small();
        let b = small();
        assert_eq!(a.rgb, b.rgb);
        let c = generate_chart(&ChartParams { texture_seed: 9, ..a.params }).unwrap();
        assert_ne!(a.rgb, c.rgb);
        assert_eq!(a.depth, c.depth);
    }

    #[test]
    fn frequency_geometry() {
        let chart = small();
        let f = chart.frequency_at(100.0);
        assert!((f - 16.0 / (2.0 * PI * 100.0)).abs() < 1e-15);
    }

    #[test]
    fn perfect_and_flat_reconstructions() {
        let chart = small();
        let radii = chart.default_radii(8);
        let curve = compute_mtf(&chart, &chart.depth, &radii).unwrap();
        assert!(curve.windows(2).all(|p| p[0].frequency_cpp < p[1].frequency_cpp));
        assert!(curve.iter().all(|p| (p.mtf - 1.0).abs() <= 0.02), "{curve:?}");

        let mean = chart.depth.depth().iter().sum::<f64>() / chart.depth.len() as f64;
        let flat = DepthMap::constant(400, 400, mean).unwrap();
        let curve = compute_mtf(&chart, &flat, &radii).unwrap();
        assert!(curve.iter().all(|p| p.mtf.abs() <= 0.02), "{curve:?}");
    }

    #[test]
    fn radius_outside_the_chart() {
        let chart = small();
        assert!(matches!(
            compute_mtf(&chart, &chart.depth, &[chart.radius + 1.0]),
            Err(Error::RadiusOutOfRange { .. })
        ));
    }
}
