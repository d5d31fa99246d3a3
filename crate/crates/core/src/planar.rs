//! Piece-wise planar approximation of a depth map.
//!
//! A model is a partition of the image into regions, one plane
//! `d = a*x + b*y + c` per region, and a validity map marking the pixels the
//! planes are meant to explain. Its statistics are the region count `N`, the
//! invalid fraction `delta = 1 - |V| / |image|`, and `epsilon`, the RMSE of the
//! planes over the valid set.
//!
//! Regions are extracted greedily: plane hypotheses from random point triples
//! in local windows, scored by inlier count, refined by least squares, and
//! the largest 4-connected inlier component is claimed. Extraction stops when
//! `delta` reaches the target, `max_regions` is hit, or repeated attempts fail.
//! Region boundaries are then relaxed toward the better-fitting plane,
//! adjacent regions that one plane explains within tolerance are merged, and
//! regions are split back into connected pieces.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{neighbors4, DepthMap, SegmentMap};

/// `depth = a * x + b * y + c`, with `x` the column and `y` the row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Plane {
    pub const fn constant(c: f64) -> Self {
        Self { a: 0.0, b: 0.0, c }
    }

    #[inline]
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.a * x + self.b * y + self.c
    }
}

/// Least-squares plane through `(x, y, depth)` points.
///
/// Solved on centered coordinates; fails when fewer than three points are
/// given or they are collinear in `(x, y)`.
pub fn fit_plane(points: &[(f64, f64, f64)]) -> Result<Plane> {
    if points.len() < 3 {
        return Err(Error::RankDeficient);
    }
    let n = points.len() as f64;
    let (mx, my, md) = points.iter().fold((0.0, 0.0, 0.0), |(a, b, c), p| (a + p.0, b + p.1, c + p.2));
    let (mx, my, md) = (mx / n, my / n, md / n);
    let (mut sxx, mut sxy, mut syy, mut sxd, mut syd) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(x, y, d) in points {
        let (dx, dy, dd) = (x - mx, y - my, d - md);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
        sxd += dx * dd;
        syd += dy * dd;
    }
    let det = sxx * syy - sxy * sxy;
    if sxx == 0.0 || syy == 0.0 || det <= 1e-10 * sxx * syy {
        return Err(Error::RankDeficient);
    }
    let a = (sxd * syy - syd * sxy) / det;
    let b = (syd * sxx - sxd * sxy) / det;
    Ok(Plane {
        a,
        b,
        c: md - a * mx - b * my,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlanarFitParams {
    /// Meters; scaled by `max(1, d / reference_depth)` when `relative`.
    pub inlier_tol: f64,
    pub relative: bool,
    pub reference_depth: f64,
    /// Minimum region size as a fraction of the image.
    pub min_region_fraction: f64,
    pub delta_target: f64,
    pub max_regions: usize,
    pub hypotheses: usize,
    pub max_failures: usize,
    pub seed: u64,
}

impl Default for PlanarFitParams {
    fn default() -> Self {
        Self {
            inlier_tol: 0.1,
            relative: true,
            reference_depth: 10.0,
            min_region_fraction: 0.002,
            delta_target: 0.1,
            max_regions: 128,
            hypotheses: 64,
            max_failures: 8,
            seed: 0,
        }
    }
}

impl PlanarFitParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.inlier_tol > 0.0) {
            return Err(Error::param("inlier_tol must be > 0"));
        }
        if !(self.reference_depth > 0.0) {
            return Err(Error::param("reference_depth must be > 0"));
        }
        if !(self.min_region_fraction > 0.0 && self.min_region_fraction <= 1.0) {
            return Err(Error::param("min_region_fraction must lie in (0, 1]"));
        }
        if !(0.0..1.0).contains(&self.delta_target) {
            return Err(Error::param("delta_target must lie in [0, 1)"));
        }
        if self.max_regions == 0 || self.hypotheses == 0 {
            return Err(Error::param("max_regions and hypotheses must be >= 1"));
        }
        Ok(())
    }

    pub fn min_region_px(&self, pixels: usize) -> usize {
        ((self.min_region_fraction * pixels as f64).ceil() as usize).max(3)
    }

    #[inline]
    fn tolerance(&self, depth: f64) -> f64 {
        if self.relative {
            self.inlier_tol * (depth / self.reference_depth).max(1.0)
        } else {
            self.inlier_tol
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelStats {
    pub regions: usize,
    pub delta: f64,
    /// Meters.
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanarModel {
    pub segments: SegmentMap,
    pub planes: Vec<Plane>,
    pub validity: Vec<bool>,
    pub stats: ModelStats,
}

impl PlanarModel {
    /// Dense plane evaluation over the whole partition.
    pub fn approximation(&self) -> DepthMap {
        let w = self.segments.width();
        let depth: Vec<f64> = self
            .segments
            .labels()
            .iter()
            .enumerate()
            .map(|(i, &l)| self.planes[l as usize].eval((i % w) as f64, (i / w) as f64))
            .collect();
        let n = depth.len();
        let valid = vec![true; n];
        DepthMap::from_parts_unchecked(w, self.segments.height(), depth, valid)
    }

    pub fn valid_count(&self) -> usize {
        self.validity.iter().filter(|&&v| v).count()
    }

    /// Lower bound on the samples needed to recover the planes: three per region.
    pub fn min_samples(&self) -> usize {
        min_samples(self.stats.regions)
    }
}

/// Three samples per planar region.
pub fn min_samples(regions: usize) -> usize {
    3 * regions
}

/// Same bound for dataset averages of the region count.
pub fn min_samples_mean(mean_regions: f64) -> f64 {
    3.0 * mean_regions
}

/// RMSE of the model's planes over its validity set.
pub fn rmse_v(d: &DepthMap, model: &PlanarModel) -> Result<f64> {
    crate::types::ensure_same(model.segments.dims(), d.dims())?;
    let w = d.width();
    let mut sum = 0.0;
    let mut count = 0usize;
    for (i, &v) in model.validity.iter().enumerate() {
        if v {
            let plane = model.planes[model.segments.labels()[i] as usize];
            let r = d.depth()[i] - plane.eval((i % w) as f64, (i / w) as f64);
            sum += r * r;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::EmptyEvaluationSet);
    }
    Ok((sum / count as f64).sqrt())
}

fn pixel_points(d: &DepthMap, idx: &[usize]) -> Vec<(f64, f64, f64)> {
    let w = d.width();
    idx.iter()
        .map(|&i| ((i % w) as f64, (i / w) as f64, d.depth()[i]))
        .collect()
}

/// Relaxation and refit rounds after extraction.
const REFINE_ROUNDS: usize = 4;

/// Hypotheses refined and checked for connectivity per extraction step.
const SHORTLIST: usize = 8;

/// Greedy sequential plane extraction.
pub fn fit_model(d: &DepthMap, params: &PlanarFitParams) -> Result<PlanarModel> {
    params.validate()?;
    let (w, h) = d.dims();
    let total = w * h;
    let min_px = params.min_region_px(total);
    if d.valid_count() < min_px {
        return Err(Error::InvalidData(format!(
            "{} valid pixels, fewer than the minimum region size {min_px}",
            d.valid_count()
        )));
    }
    let depth = d.depth();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut region_of = vec![u32::MAX; total];
    let mut planes: Vec<Plane> = Vec::new();
    let mut assigned = 0usize;
    let mut failures = 0usize;
    let window = (((w * w + h * h) as f64).sqrt() / 8.0).max(3.0) as i64;

    let is_inlier = |i: usize, p: &Plane| -> bool {
        let r = (depth[i] - p.eval((i % w) as f64, (i / w) as f64)).abs();
        r <= params.tolerance(depth[i])
    };

    while planes.len() < params.max_regions && failures < params.max_failures {
        let delta = 1.0 - assigned as f64 / total as f64;
        if delta <= params.delta_target {
            break;
        }
        let free: Vec<usize> = (0..total).filter(|&i| d.valid()[i] && region_of[i] == u32::MAX).collect();
        if free.len() < min_px {
            break;
        }

        let scoring: Vec<usize> = if free.len() > 4000 {
            free.choose_multiple(&mut rng, 4000).copied().collect()
        } else {
            free.clone()
        };
        let mut hypotheses = Vec::with_capacity(params.hypotheses);
        for _ in 0..params.hypotheses {
            let &seed_px = free.choose(&mut rng).expect("non-empty");
            let (sx, sy) = ((seed_px % w) as i64, (seed_px / w) as i64);
            let mut triple = vec![seed_px];
            for _ in 0..32 {
                if triple.len() == 3 {
                    break;
                }
                let x = (sx + rng.random_range(-window / 2..=window / 2)).clamp(0, w as i64 - 1) as usize;
                let y = (sy + rng.random_range(-window / 2..=window / 2)).clamp(0, h as i64 - 1) as usize;
                let i = y * w + x;
                if d.valid()[i] && region_of[i] == u32::MAX && !triple.contains(&i) {
                    triple.push(i);
                }
            }
            if triple.len() == 3 {
                if let Ok(p) = fit_plane(&pixel_points(d, &triple)) {
                    hypotheses.push(p);
                }
            }
        }
        // Inlier counts shortlist the hypotheses; the winner is the one whose
        // refined plane claims the largest connected region.
        let mut ranked: Vec<(usize, usize)> = hypotheses
            .par_iter()
            .enumerate()
            .map(|(k, p)| (scoring.iter().filter(|&&i| is_inlier(i, p)).count(), k))
            .collect();
        ranked.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        ranked.truncate(SHORTLIST);
        let best = ranked
            .par_iter()
            .map(|&(_, k)| {
                let mut plane = hypotheses[k];
                let mut inliers: Vec<usize> = Vec::new();
                for _ in 0..3 {
                    inliers = free.iter().copied().filter(|&i| is_inlier(i, &plane)).collect();
                    match fit_plane(&pixel_points(d, &inliers)) {
                        Ok(p) => plane = p,
                        Err(_) => break,
                    }
                }
                (largest_component(&inliers, w, h), plane, k)
            })
            .max_by(|a, b| a.0.len().cmp(&b.0.len()).then(b.2.cmp(&a.2)));
        let Some((component, mut plane, _)) = best else {
            failures += 1;
            continue;
        };
        if component.len() < min_px {
            failures += 1;
            continue;
        }
        if let Ok(p) = fit_plane(&pixel_points(d, &component)) {
            plane = p;
        }
        let label = planes.len() as u32;
        for &i in &component {
            region_of[i] = label;
        }
        assigned += component.len();
        planes.push(plane);
        failures = 0;
    }

    let tolerance = |z: f64| params.tolerance(z);
    let (region_of, planes) = refine_regions(d, region_of, planes, min_px, &tolerance);
    let (region_of, planes) = trim_regions(region_of, planes, params.delta_target);
    let assigned = region_of.iter().filter(|&&r| r != u32::MAX).count();
    let validity: Vec<bool> = region_of.iter().map(|&r| r != u32::MAX).collect();
    if planes.is_empty() {
        // no region large enough: one plane over every valid pixel
        let valid_idx: Vec<usize> = (0..total).filter(|&i| d.valid()[i]).collect();
        let pts = pixel_points(d, &valid_idx);
        let plane = fit_plane(&pts)
            .unwrap_or_else(|_| Plane::constant(pts.iter().map(|p| p.2).sum::<f64>() / pts.len() as f64));
        let segments = SegmentMap::new(w, h, vec![0; total], 1)?;
        let mut model = PlanarModel {
            segments,
            planes: vec![plane],
            validity: d.valid().to_vec(),
            stats: ModelStats {
                regions: 1,
                delta: 1.0 - valid_idx.len() as f64 / total as f64,
                epsilon: 0.0,
            },
        };
        model.stats.epsilon = rmse_v(d, &model)?;
        return Ok(model);
    }

    let labels = grow_labels(region_of, w, h);
    let segments = SegmentMap::new(w, h, labels, planes.len())?;
    let mut model = PlanarModel {
        segments,
        planes,
        validity,
        stats: ModelStats {
            regions: 0,
            delta: 1.0 - assigned as f64 / total as f64,
            epsilon: 0.0,
        },
    };
    model.stats.regions = model.planes.len();
    model.stats.epsilon = rmse_v(d, &model)?;
    Ok(model)
}

/// Moment sums of `(x, y, z)` for constant-time union plane fits.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: f64,
    x: f64,
    y: f64,
    z: f64,
    xx: f64,
    xy: f64,
    yy: f64,
    xz: f64,
    yz: f64,
    zz: f64,
}

impl Moments {
    fn add(&mut self, x: f64, y: f64, z: f64) {
        self.n += 1.0;
        self.x += x;
        self.y += y;
        self.z += z;
        self.xx += x * x;
        self.xy += x * y;
        self.yy += y * y;
        self.xz += x * z;
        self.yz += y * z;
        self.zz += z * z;
    }

    fn merged(&self, o: &Moments) -> Moments {
        Moments {
            n: self.n + o.n,
            x: self.x + o.x,
            y: self.y + o.y,
            z: self.z + o.z,
            xx: self.xx + o.xx,
            xy: self.xy + o.xy,
            yy: self.yy + o.yy,
            xz: self.xz + o.xz,
            yz: self.yz + o.yz,
            zz: self.zz + o.zz,
        }
    }

    /// Mean squared residual of the least-squares plane, or `None` when degenerate.
    fn mse(&self) -> Option<f64> {
        let n = self.n;
        let (mx, my, mz) = (self.x / n, self.y / n, self.z / n);
        let sxx = self.xx - n * mx * mx;
        let sxy = self.xy - n * mx * my;
        let syy = self.yy - n * my * my;
        let sxz = self.xz - n * mx * mz;
        let syz = self.yz - n * my * mz;
        let szz = self.zz - n * mz * mz;
        let det = sxx * syy - sxy * sxy;
        if n < 3.0 || det <= 1e-10 * sxx * syy || sxx <= 0.0 || syy <= 0.0 {
            return None;
        }
        let a = (sxz * syy - syz * sxy) / det;
        let b = (syz * sxx - sxz * sxy) / det;
        Some(((szz - a * sxz - b * syz) / n).max(0.0))
    }
}

/// Cleanup after greedy extraction.
///
/// Greedy claims are order dependent: where two planes cross inside a third
/// surface, the first one claims a strip along the crossing line and cuts
/// that surface in two. Here boundary pixels migrate to the neighboring plane
/// they fit best, regions grow into uncovered inliers, adjacent regions whose union one plane explains within
/// tolerance merge (best fit first), and regions are split back into
/// 4-connected pieces; pieces below `min_px` become uncovered.
fn refine_regions(
    d: &DepthMap,
    mut region_of: Vec<u32>,
    mut planes: Vec<Plane>,
    min_px: usize,
    tolerance: &(dyn Fn(f64) -> f64 + Sync),
) -> (Vec<u32>, Vec<Plane>) {
    let (w, h) = d.dims();
    let depth = d.depth();
    let residual = |i: usize, p: &Plane| (depth[i] - p.eval((i % w) as f64, (i / w) as f64)).abs();

    // Boundary pixels move to a neighboring region whose plane fits them
    // strictly better, and uncovered valid pixels join a neighboring region
    // they are inliers of. Each move lowers that pixel's residual, so the
    // inner loop ends; planes are then refit to their new members.
    let valid = d.valid();
    for _ in 0..REFINE_ROUNDS {
        let mut changed = false;
        loop {
            let moves: Vec<(usize, u32)> = (0..w * h)
                .into_par_iter()
                .filter_map(|i| {
                    if !valid[i] {
                        return None;
                    }
                    let r = region_of[i];
                    let tol = tolerance(depth[i]);
                    let mut best = match r {
                        u32::MAX => (f64::INFINITY, r),
                        _ => (residual(i, &planes[r as usize]), r),
                    };
                    for j in neighbors4(i % w, i / w, w, h) {
                        let q = region_of[j];
                        if q != u32::MAX && q != r {
                            let e = residual(i, &planes[q as usize]);
                            if e <= tol && (e, q) < best {
                                best = (e, q);
                            }
                        }
                    }
                    (best.1 != r).then_some((i, best.1))
                })
                .collect();
            if moves.is_empty() {
                break;
            }
            changed = true;
            for (i, q) in moves {
                region_of[i] = q;
            }
        }
        if !changed {
            break;
        }
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); planes.len()];
        for (i, &r) in region_of.iter().enumerate() {
            if r != u32::MAX {
                members[r as usize].push(i);
            }
        }
        planes.par_iter_mut().zip(&members).for_each(|(p, m)| {
            if let Ok(fit) = fit_plane(&pixel_points(d, m)) {
                *p = fit;
            }
        });
    }

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); planes.len()];
    for (i, &r) in region_of.iter().enumerate() {
        if r != u32::MAX {
            members[r as usize].push(i);
        }
    }
    let moments = |m: &[usize]| {
        let mut acc = Moments::default();
        for &i in m {
            acc.add((i % w) as f64, (i / w) as f64, depth[i]);
        }
        acc
    };
    let mut sums: Vec<Moments> = members.iter().map(|m| moments(m)).collect();
    let max_tol = |m: &[usize]| m.iter().map(|&i| tolerance(depth[i])).fold(0.0, f64::max);
    let mut limits: Vec<f64> = members.iter().map(|m| max_tol(m)).collect();

    // Merge candidates: the moment fit rules out most pairs cheaply, the
    // per-pixel check decides.
    let try_pair = |members: &[Vec<usize>], sums: &[Moments], limits: &[f64], a: usize, b: usize| -> Option<(f64, Plane)> {
        if members[a].is_empty() || members[b].is_empty() {
            return None;
        }
        let mse = sums[a].merged(&sums[b]).mse()?;
        let limit = limits[a].max(limits[b]);
        if mse > limit * limit * (1.0 + 1e-9) {
            return None;
        }
        let union: Vec<usize> = members[a].iter().chain(&members[b]).copied().collect();
        let plane = fit_plane(&pixel_points(d, &union)).ok()?;
        union.iter().all(|&i| residual(i, &plane) <= tolerance(depth[i])).then_some((mse, plane))
    };
    let k = planes.len();
    let mut adjacent: Vec<std::collections::BTreeSet<usize>> = vec![Default::default(); k];
    for i in 0..w * h {
        let a = region_of[i];
        if a == u32::MAX {
            continue;
        }
        for j in neighbors4(i % w, i / w, w, h) {
            let b = region_of[j];
            if b != u32::MAX && b != a {
                adjacent[a as usize].insert(b as usize);
            }
        }
    }
    let mut fits: std::collections::BTreeMap<(usize, usize), (f64, Plane)> = (0..k)
        .flat_map(|a| adjacent[a].iter().filter(move |&&b| b > a).map(move |&b| (a, b)))
        .collect::<Vec<_>>()
        .par_iter()
        .filter_map(|&(a, b)| try_pair(&members, &sums, &limits, a, b).map(|f| ((a, b), f)))
        .collect();
    while let Some((&(a, b), &(_, plane))) = fits.iter().min_by(|x, y| x.1 .0.total_cmp(&y.1 .0).then(x.0.cmp(y.0))) {
        let moved = std::mem::take(&mut members[b]);
        for &i in &moved {
            region_of[i] = a as u32;
        }
        members[a].extend(moved);
        sums[a] = sums[a].merged(&sums[b]);
        sums[b] = Moments::default();
        limits[a] = limits[a].max(limits[b]);
        planes[a] = plane;
        fits.retain(|&(x, y), _| x != a && y != a && x != b && y != b);
        let moved_adj = std::mem::take(&mut adjacent[b]);
        for &z in &moved_adj {
            adjacent[z].remove(&b);
            if z != a {
                adjacent[z].insert(a);
            }
        }
        adjacent[a].extend(moved_adj.into_iter().filter(|&z| z != a));
        adjacent[a].remove(&b);
        let others: Vec<usize> = adjacent[a].iter().copied().collect();
        let fresh: Vec<((usize, usize), (f64, Plane))> = others
            .par_iter()
            .filter_map(|&z| {
                let key = (a.min(z), a.max(z));
                try_pair(&members, &sums, &limits, key.0, key.1).map(|f| (key, f))
            })
            .collect();
        fits.extend(fresh);
    }

    let mut out = vec![u32::MAX; w * h];
    let mut kept = Vec::new();
    for m in members.iter().filter(|m| !m.is_empty()) {
        for comp in components(m, w, h) {
            if comp.len() < min_px {
                continue;
            }
            let label = kept.len() as u32;
            for &i in &comp {
                out[i] = label;
            }
            kept.push(fit_plane(&pixel_points(d, &comp)).unwrap_or(planes[region_of[comp[0]] as usize]));
        }
    }
    (out, kept)
}

/// Drops the smallest regions while the uncovered fraction stays within
/// `delta_target`; refinement can leave late, small regions redundant.
fn trim_regions(mut region_of: Vec<u32>, planes: Vec<Plane>, delta_target: f64) -> (Vec<u32>, Vec<Plane>) {
    let total = region_of.len();
    let mut sizes = vec![0usize; planes.len()];
    for &r in &region_of {
        if r != u32::MAX {
            sizes[r as usize] += 1;
        }
    }
    let mut uncovered = total - sizes.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..planes.len()).collect();
    order.sort_by(|&a, &b| sizes[a].cmp(&sizes[b]).then(b.cmp(&a)));
    let mut dropped = vec![false; planes.len()];
    for &k in order.iter().take(planes.len().saturating_sub(1)) {
        if (uncovered + sizes[k]) as f64 / total as f64 > delta_target {
            break;
        }
        uncovered += sizes[k];
        dropped[k] = true;
    }
    let mut remap = vec![u32::MAX; planes.len()];
    let mut kept = Vec::new();
    for (k, p) in planes.into_iter().enumerate() {
        if !dropped[k] {
            remap[k] = kept.len() as u32;
            kept.push(p);
        }
    }
    for r in region_of.iter_mut().filter(|r| **r != u32::MAX) {
        *r = remap[*r as usize];
    }
    (region_of, kept)
}

/// 4-connected components of a pixel set, in raster order of first pixel.
fn components(pixels: &[usize], w: usize, h: usize) -> Vec<Vec<usize>> {
    let mut member = vec![false; w * h];
    for &i in pixels {
        member[i] = true;
    }
    let mut sorted = pixels.to_vec();
    sorted.sort_unstable();
    let mut seen = vec![false; w * h];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for &start in &sorted {
        if seen[start] {
            continue;
        }
        let mut comp = vec![start];
        seen[start] = true;
        stack.push(start);
        while let Some(i) = stack.pop() {
            for j in neighbors4(i % w, i / w, w, h) {
                if member[j] && !seen[j] {
                    seen[j] = true;
                    comp.push(j);
                    stack.push(j);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// Largest 4-connected component of a pixel set (ties: first in raster order).
fn largest_component(pixels: &[usize], w: usize, h: usize) -> Vec<usize> {
    let mut member = vec![false; w * h];
    for &i in pixels {
        member[i] = true;
    }
    let mut seen = vec![false; w * h];
    let mut best: Vec<usize> = Vec::new();
    let mut stack = Vec::new();
    for &start in pixels {
        if seen[start] {
            continue;
        }
        let mut comp = vec![start];
        seen[start] = true;
        stack.push(start);
        while let Some(i) = stack.pop() {
            for j in neighbors4(i % w, i / w, w, h) {
                if member[j] && !seen[j] {
                    seen[j] = true;
                    comp.push(j);
                    stack.push(j);
                }
            }
        }
        if comp.len() > best.len() {
            best = comp;
        }
    }
    best.sort_unstable();
    best
}

/// Breadth-first growth of labelled regions into unlabelled pixels.
fn grow_labels(mut region_of: Vec<u32>, w: usize, h: usize) -> Vec<u32> {
    let mut queue: std::collections::VecDeque<usize> =
        (0..w * h).filter(|&i| region_of[i] != u32::MAX).collect();
    while let Some(i) = queue.pop_front() {
        for j in neighbors4(i % w, i / w, w, h) {
            if region_of[j] == u32::MAX {
                region_of[j] = region_of[i];
                queue.push_back(j);
            }
        }
    }
    region_of
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_plane() {
        let pts: Vec<_> = [(0.0, 0.0), (3.0, 1.0), (1.0, 4.0), (5.0, 5.0)]
            .iter()
            .map(|&(x, y)| (x, y, 2.0 * x + 3.0 * y + 1.0))
            .collect();
        let p = fit_plane(&pts).unwrap();
        assert!((p.a - 2.0).abs() < 1e-9 && (p.b - 3.0).abs() < 1e-9 && (p.c - 1.0).abs() < 1e-9);
    }

    #[test]
    fn constant_depth() {
        let pts = [(0.0, 0.0, 5.0), (1.0, 0.0, 5.0), (0.0, 1.0, 5.0), (1.0, 1.0, 5.0)];
        let p = fit_plane(&pts).unwrap();
        assert!(p.a.abs() < 1e-12 && p.b.abs() < 1e-12 && (p.c - 5.0).abs() < 1e-12);
    }

    #[test]
    fn rank_deficient_inputs() {
        assert!(matches!(fit_plane(&[(0.0, 0.0, 1.0), (1.0, 1.0, 2.0)]), Err(Error::RankDeficient)));
        let line = [(0.0, 0.0, 1.0), (1.0, 1.0, 2.0), (2.0, 2.0, 3.0), (5.0, 5.0, 0.0)];
        assert!(matches!(fit_plane(&line), Err(Error::RankDeficient)));
        let vertical = [(3.0, 0.0, 1.0), (3.0, 1.0, 2.0), (3.0, 7.0, 3.0)];
        assert!(matches!(fit_plane(&vertical), Err(Error::RankDeficient)));
    }

    #[test]
    fn min_samples_bound() {
        assert_eq!(min_samples(1), 3);
        assert_eq!(min_samples(7), 21);
        assert!((min_samples_mean(66.6) - 200.0).abs() < 0.5);
        assert!((min_samples_mean(18.5) - 56.0).abs() < 0.6);
    }

    fn hand_model(valid: Vec<bool>, plane: Plane) -> PlanarModel {
        PlanarModel {
            segments: SegmentMap::new(3, 1, vec![0; 3], 1).unwrap(),
            planes: vec![plane],
            validity: valid,
            stats: ModelStats {
                regions: 1,
                delta: 0.0,
                epsilon: 0.0,
            },
        }
    }

    #[test]
    fn rmse_v_examples() {
        let d = DepthMap::dense(3, 1, vec![1.0, 1.0, 1.0]).unwrap();
        assert_eq!(rmse_v(&d, &hand_model(vec![true; 3], Plane::constant(1.0))).unwrap(), 0.0);
        let m = hand_model(vec![false, true, false], Plane::constant(3.0));
        assert_eq!(rmse_v(&d, &m).unwrap(), 2.0);
        let empty = hand_model(vec![false; 3], Plane::constant(3.0));
        assert!(matches!(rmse_v(&d, &empty), Err(Error::EmptyEvaluationSet)));
    }

    #[test]
    fn largest_component_picks_biggest() {
        // 5x1 row: {0,1} and {3} separated by a gap
        assert_eq!(largest_component(&[0, 1, 3], 5, 1), vec![0, 1]);
    }
}
