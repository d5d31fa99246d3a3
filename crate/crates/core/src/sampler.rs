//! Sampling patterns and their execution against a dense depth source.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::superpixel::lattice_shape;
use crate::types::{DepthMap, Sample, SampleSet, SamplerKind, SegmentMap};

/// Where a sampler wants to measure. Coordinates are `(x, y)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SamplePattern {
    pub width: usize,
    pub height: usize,
    pub coords: Vec<(usize, usize)>,
    pub sampler: SamplerKind,
    pub budget: usize,
}

impl SamplePattern {
    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }
}

/// Half-up rounding of `sum / count` for non-negative integers, exactly.
fn round_mean(sum: u64, count: u64) -> u64 {
    (2 * sum + count) / (2 * count)
}

/// Member of `members` (pixel indices) closest to the exact center of mass.
///
/// Distances are compared as `count^2 * dist^2` in integers so ties are exact;
/// ties go to the smaller `y`, then the smaller `x`.
pub(crate) fn nearest_member_to_com(members: &[usize], width: usize) -> (usize, usize) {
    let k = members.len() as i128;
    let (sx, sy) = members.iter().fold((0i128, 0i128), |(sx, sy), &i| {
        (sx + (i % width) as i128, sy + (i / width) as i128)
    });
    let mut best: Option<(i128, usize, usize)> = None;
    for &i in members {
        let (x, y) = (i % width, i / width);
        let dx = k * x as i128 - sx;
        let dy = k * y as i128 - sy;
        let d = dx * dx + dy * dy;
        let better = match best {
            None => true,
            Some((bd, bx, by)) => d < bd || (d == bd && (y, x) < (by, bx)),
        };
        if better {
            best = Some((d, x, y));
        }
    }
    let (_, x, y) = best.expect("segment has at least one member");
    (x, y)
}

/// Center-of-mass sample location of one segment: the half-up rounded mean
/// position if it lies in the segment, else the member nearest to the mean.
pub fn com_location(segments: &SegmentMap, members: &[usize], label: usize) -> (usize, usize) {
    let w = segments.width();
    let k = members.len() as u64;
    let (sx, sy) = members
        .iter()
        .fold((0u64, 0u64), |(sx, sy), &i| (sx + (i % w) as u64, sy + (i / w) as u64));
    let (rx, ry) = (round_mean(sx, k) as usize, round_mean(sy, k) as usize);
    if rx < w && ry < segments.height() && segments.label(rx, ry) == label {
        (rx, ry)
    } else {
        nearest_member_to_com(members, w)
    }
}

/// One sample per segment at its center of mass.
pub fn com_pattern(segments: &SegmentMap) -> SamplePattern {
    let members = segments.members();
    let coords = members
        .iter()
        .enumerate()
        .map(|(label, m)| com_location(segments, m, label))
        .collect();
    SamplePattern {
        width: segments.width(),
        height: segments.height(),
        coords,
        sampler: SamplerKind::Com,
        budget: segments.num_segments(),
    }
}

/// `n` distinct pixels drawn uniformly without replacement.
pub fn random_pattern(width: usize, height: usize, n: usize, seed: u64) -> Result<SamplePattern> {
    let pixels = width * height;
    if n > pixels {
        return Err(Error::BudgetExceedsPixels {
            requested: n,
            pixels,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coords = index::sample(&mut rng, pixels, n)
        .into_iter()
        .map(|i| (i % width, i / width))
        .collect();
    Ok(SamplePattern {
        width,
        height,
        coords,
        sampler: SamplerKind::Random,
        budget: n,
    })
}

/// Aspect-preserving lattice with at most `n` points at cell centers.
pub fn grid_pattern(width: usize, height: usize, n: usize) -> Result<SamplePattern> {
    if n == 0 {
        return Err(Error::param("grid pattern needs n >= 1"));
    }
    let (rows, cols) = lattice_shape(width, height, n);
    // keep rows * cols <= n after rounding
    let cols = cols.min(n / rows).max(1);
    let mut coords = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let y = (2 * r + 1) * height / (2 * rows);
        for c in 0..cols {
            coords.push(((2 * c + 1) * width / (2 * cols), y));
        }
    }
    Ok(SamplePattern {
        width,
        height,
        coords,
        sampler: SamplerKind::Grid,
        budget: n,
    })
}

/// Optional additive measurement noise. Off unless explicitly requested.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianNoise {
    pub sigma: f64,
    pub seed: u64,
}

/// Reads `gt` at every pattern coordinate (a noiseless range sensor).
///
/// A coordinate on an invalid ground-truth pixel moves to the nearest valid
/// pixel of its segment when `segments` is given, and is dropped otherwise
/// or when the segment holds no valid pixel. Counts land in
/// [`SampleSet::dropped`] and [`SampleSet::relocated`].
pub fn execute(
    pattern: &SamplePattern,
    gt: &DepthMap,
    segments: Option<&SegmentMap>,
    noise: Option<GaussianNoise>,
) -> Result<SampleSet> {
    gt.ensure_dims(pattern.width, pattern.height)?;
    if let Some(s) = segments {
        gt.ensure_dims(s.width(), s.height())?;
    }
    let w = gt.width();
    let members = segments.map(|s| s.members());
    let mut seen = std::collections::HashSet::new();
    let mut entries = Vec::with_capacity(pattern.coords.len());
    let (mut dropped, mut relocated) = (0, 0);
    for &(x, y) in &pattern.coords {
        if x >= w || y >= gt.height() {
            return Err(Error::InvalidData(format!("pattern coordinate ({x}, {y}) out of bounds")));
        }
        let (x, y) = if gt.is_valid(x, y) {
            (x, y)
        } else {
            let moved = match (segments, &members) {
                (Some(s), Some(m)) => nearest_valid_in_segment(gt, &m[s.label(x, y)], x, y),
                _ => None,
            };
            match moved {
                Some(p) => {
                    relocated += 1;
                    p
                }
                None => {
                    dropped += 1;
                    continue;
                }
            }
        };
        if !seen.insert((x, y)) {
            dropped += 1;
            continue;
        }
        entries.push(Sample {
            x,
            y,
            depth: gt.at(x, y),
        });
    }
    if let Some(noise) = noise {
        if !(noise.sigma >= 0.0) {
            return Err(Error::param("noise sigma must be >= 0"));
        }
        let normal = Normal::new(0.0, noise.sigma).map_err(|e| Error::param(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
        for s in &mut entries {
            s.depth = (s.depth + normal.sample(&mut rng)).max(0.0);
        }
    }
    let mut set = SampleSet::new(w, gt.height(), entries, pattern.sampler, pattern.budget.max(pattern.coords.len()))?;
    set.dropped = dropped;
    set.relocated = relocated;
    Ok(set)
}

fn nearest_valid_in_segment(gt: &DepthMap, members: &[usize], x: usize, y: usize) -> Option<(usize, usize)> {
    let w = gt.width();
    members
        .iter()
        .map(|&i| (i % w, i / w))
        .filter(|&(mx, my)| gt.is_valid(mx, my))
        .min_by_key(|&(mx, my)| {
            let dx = mx as i64 - x as i64;
            let dy = my as i64 - y as i64;
            (dx * dx + dy * dy, my, mx)
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(width: usize, height: usize, labels: Vec<u32>) -> SegmentMap {
        SegmentMap::from_raw_labels(width, height, &labels).unwrap()
    }

    #[test]
    fn symmetric_square_samples_its_middle() {
        let s = seg(3, 3, vec![0; 9]);
        assert_eq!(com_pattern(&s).coords, vec![(1, 1)]);
    }

    #[test]
    fn l_shape_falls_back_to_nearest_member() {
        // members (x, y): (0,0), (0,1), (0,2), (1,2), (2,2); CoM (0.6, 1.4)
        let mut labels = vec![1u32; 9];
        for (x, y) in [(0, 0), (0, 1), (0, 2), (1, 2), (2, 2)] {
            labels[y * 3 + x] = 0;
        }
        let s = seg(3, 3, labels);
        let p = com_pattern(&s);
        let l = s.label(0, 0);
        // (0,1) and (1,2) are both at squared distance 0.52; smaller y wins
        assert_eq!(p.coords[l], (0, 1));
        // the other segment is the rest of the square
        assert_eq!(s.label(p.coords[1 - l].0, p.coords[1 - l].1), 1 - l);
    }

    #[test]
    fn half_up_rounding() {
        assert_eq!(round_mean(1, 2), 1); // 0.5 -> 1
        assert_eq!(round_mean(3, 2), 2); // 1.5 -> 2
        assert_eq!(round_mean(4, 3), 1); // 1.33 -> 1
        assert_eq!(round_mean(5, 3), 2); // 1.67 -> 2
    }

    #[test]
    fn random_examples() {
        let all = random_pattern(5, 4, 20, 1).unwrap();
        let mut c = all.coords.clone();
        c.sort();
        c.dedup();
        assert_eq!(c.len(), 20);
        assert!(random_pattern(5, 4, 0, 1).unwrap().is_empty());
        assert_eq!(random_pattern(50, 40, 30, 9).unwrap(), random_pattern(50, 40, 30, 9).unwrap());
        assert_ne!(random_pattern(50, 40, 30, 9).unwrap(), random_pattern(50, 40, 30, 10).unwrap());
        assert!(random_pattern(5, 4, 21, 1).is_err());
    }

    #[test]
    fn grid_examples() {
        let g = grid_pattern(100, 100, 4).unwrap();
        assert_eq!(g.coords, vec![(25, 25), (75, 25), (25, 75), (75, 75)]);
        assert_eq!(grid_pattern(100, 100, 1).unwrap().coords, vec![(50, 50)]);
        let full = grid_pattern(10, 10, 100).unwrap();
        assert_eq!(full.len(), 100);
        for (i, &(x, y)) in full.coords.iter().enumerate() {
            assert_eq!((x, y), (i % 10, i / 10));
        }
        assert!(grid_pattern(10, 10, 0).is_err());
        for n in 1..60 {
            assert!(grid_pattern(37, 23, n).unwrap().len() <= n);
        }
    }

    #[test]
    fn execute_examples() {
        let gt = DepthMap::constant(6, 4, 5.0).unwrap();
        let p = random_pattern(6, 4, 7, 3).unwrap();
        let s = execute(&p, &gt, None, None).unwrap();
        assert_eq!(s.len(), 7);
        assert!(s.entries().iter().all(|e| e.depth == 5.0));

        let mut valid = vec![true; 24];
        valid[2] = false;
        let gt = DepthMap::new(6, 4, vec![5.0; 24], valid).unwrap();
        let p = SamplePattern {
            width: 6,
            height: 4,
            coords: vec![(2, 0), (3, 3), (5, 1)],
            sampler: SamplerKind::Grid,
            budget: 3,
        };
        let s = execute(&p, &gt, None, None).unwrap();
        assert_eq!((s.len(), s.dropped, s.relocated), (2, 1, 0));

        let segs = SegmentMap::new(6, 4, vec![0; 24], 1).unwrap();
        let s = execute(&p, &gt, Some(&segs), None).unwrap();
        assert_eq!((s.len(), s.dropped, s.relocated), (3, 0, 1));
        assert_eq!((s.entries()[0].x, s.entries()[0].y), (1, 0));
    }

    #[test]
    fn noise_is_seeded() {
        let gt = DepthMap::constant(8, 8, 5.0).unwrap();
        let p = grid_pattern(8, 8, 16).unwrap();
        let n = Some(GaussianNoise { sigma: 0.1, seed: 4 });
        let a = execute(&p, &gt, None, n).unwrap();
        let b = execute(&p, &gt, None, n).unwrap();
        assert_eq!(a, b);
        assert!(a.entries().iter().any(|e| e.depth != 5.0));
    }
}
