//! Image, depth, segmentation and sample containers shared by every stage.
//!
//! All containers are row-major with `index = y * width + x`, where `x` is the
//! pixel column and `y` the pixel row. Depth is in meters throughout.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_dims(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::param(format!(
            "image dimensions must be positive, got {width}x{height}"
        )));
    }
    Ok(())
}

/// 8-bit sRGB image, 3 interleaved channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        check_dims(width, height)?;
        if pixels.len() != width * height * 3 {
            return Err(Error::InvalidData(format!(
                "RGB buffer has {} bytes, expected {}",
                pixels.len(),
                width * height * 3
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// Single-channel input, replicated into all three channels.
    pub fn from_gray(width: usize, height: usize, gray: &[u8]) -> Result<Self> {
        let pixels = gray.iter().flat_map(|&g| [g, g, g]).collect();
        Self::new(width, height, pixels)
    }

    pub fn filled(width: usize, height: usize, color: [u8; 3]) -> Result<Self> {
        Self::from_fn(width, height, |_, _| color)
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [u8; 3],
    ) -> Result<Self> {
        check_dims(width, height)?;
        let mut pixels = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                pixels.extend_from_slice(&f(x, y));
            }
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn set(&mut self, x: usize, y: usize, color: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.pixels[i..i + 3].copy_from_slice(&color);
    }

    /// Rec. 601 luma in [0, 255].
    pub fn luma(&self) -> Vec<f64> {
        self.pixels
            .chunks_exact(3)
            .map(|p| 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64)
            .collect()
    }
}

/// Dense range image with a validity mask. Invalid pixels carry no meaning.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    depth: Vec<f64>,
    valid: Vec<bool>,
}

impl DepthMap {
    pub fn new(width: usize, height: usize, depth: Vec<f64>, valid: Vec<bool>) -> Result<Self> {
        check_dims(width, height)?;
        let n = width * height;
        if depth.len() != n || valid.len() != n {
            return Err(Error::InvalidData(format!(
                "depth buffers have {}/{} entries, expected {n}",
                depth.len(),
                valid.len()
            )));
        }
        for (i, (&d, &v)) in depth.iter().zip(&valid).enumerate() {
            if v && !(d.is_finite() && d >= 0.0) {
                return Err(Error::InvalidData(format!(
                    "valid pixel ({}, {}) has depth {d}",
                    i % width,
                    i / width
                )));
            }
        }
        Ok(Self {
            width,
            height,
            depth,
            valid,
        })
    }

    /// Fully valid depth map.
    pub fn dense(width: usize, height: usize, depth: Vec<f64>) -> Result<Self> {
        let valid = vec![true; depth.len()];
        Self::new(width, height, depth, valid)
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::dense(width, height, vec![value; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        check_dims(width, height)?;
        let mut depth = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                depth.push(f(x, y));
            }
        }
        Self::dense(width, height, depth)
    }

    /// Builds a map without re-validating; callers guarantee the invariants.
    pub(crate) fn from_parts_unchecked(
        width: usize,
        height: usize,
        depth: Vec<f64>,
        valid: Vec<bool>,
    ) -> Self {
        debug_assert_eq!(depth.len(), width * height);
        debug_assert_eq!(valid.len(), width * height);
        Self {
            width,
            height,
            depth,
            valid,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn depth(&self) -> &[f64] {
        &self.depth
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.depth[y * self.width + x]
    }

    #[inline]
    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        self.valid[y * self.width + x]
    }

    pub fn get(&self, x: usize, y: usize) -> Option<f64> {
        let i = y * self.width + x;
        self.valid[i].then(|| self.depth[i])
    }

    pub fn is_fully_valid(&self) -> bool {
        self.valid.iter().all(|&v| v)
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    /// Min and max over valid pixels.
    pub fn valid_range(&self) -> Option<(f64, f64)> {
        self.depth
            .iter()
            .zip(&self.valid)
            .filter(|(_, &v)| v)
            .fold(None, |acc, (&d, _)| match acc {
                None => Some((d, d)),
                Some((lo, hi)) => Some((lo.min(d), hi.max(d))),
            })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub(crate) fn ensure_dims(&self, width: usize, height: usize) -> Result<()> {
        ensure_same((width, height), self.dims())
    }
}

pub(crate) fn ensure_same(expected: (usize, usize), actual: (usize, usize)) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}

/// Partition of the image domain into `num_segments` labelled regions.
///
/// Construction checks that every label in `[0, num_segments)` is used.
/// 4-connectivity of each segment is checked separately with
/// [`SegmentMap::is_connected`] because some producers (plane fits on
/// disconnected regions) do not promise it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentMap {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    num_segments: usize,
}

impl SegmentMap {
    pub fn new(width: usize, height: usize, labels: Vec<u32>, num_segments: usize) -> Result<Self> {
        check_dims(width, height)?;
        if labels.len() != width * height {
            return Err(Error::InvalidData(format!(
                "label buffer has {} entries, expected {}",
                labels.len(),
                width * height
            )));
        }
        let mut used = vec![false; num_segments];
        for &l in &labels {
            let l = l as usize;
            if l >= num_segments {
                return Err(Error::InvalidData(format!(
                    "label {l} out of range for {num_segments} segments"
                )));
            }
            used[l] = true;
        }
        if let Some(missing) = used.iter().position(|&u| !u) {
            return Err(Error::InvalidData(format!("segment {missing} has no pixels")));
        }
        Ok(Self {
            width,
            height,
            labels,
            num_segments,
        })
    }

    /// Compacts arbitrary labels to `0..N` in raster order of first appearance.
    pub fn from_raw_labels(width: usize, height: usize, raw: &[u32]) -> Result<Self> {
        let mut map = std::collections::HashMap::new();
        let labels: Vec<u32> = raw
            .iter()
            .map(|&r| {
                let next = map.len() as u32;
                *map.entry(r).or_insert(next)
            })
            .collect();
        let n = map.len();
        Self::new(width, height, labels, n)
    }

    /// Splits every label into its 4-connected components, relabelled in raster order.
    pub fn connected_components(width: usize, height: usize, raw: &[u32]) -> Result<Self> {
        check_dims(width, height)?;
        let n = width * height;
        if raw.len() != n {
            return Err(Error::InvalidData("label buffer size mismatch".into()));
        }
        let mut out = vec![u32::MAX; n];
        let mut next = 0u32;
        let mut stack = Vec::new();
        for start in 0..n {
            if out[start] != u32::MAX {
                continue;
            }
            let target = raw[start];
            out[start] = next;
            stack.push(start);
            while let Some(i) = stack.pop() {
                let (x, y) = (i % width, i / width);
                for j in neighbors4(x, y, width, height) {
                    if out[j] == u32::MAX && raw[j] == target {
                        out[j] = next;
                        stack.push(j);
                    }
                }
            }
            next += 1;
        }
        Ok(Self {
            width,
            height,
            labels: out,
            num_segments: next as usize,
        })
    }

    pub(crate) fn from_parts_unchecked(
        width: usize,
        height: usize,
        labels: Vec<u32>,
        num_segments: usize,
    ) -> Self {
        Self {
            width,
            height,
            labels,
            num_segments,
        }
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

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn num_segments(&self) -> usize {
        self.num_segments
    }

    #[inline]
    pub fn label(&self, x: usize, y: usize) -> usize {
        self.labels[y * self.width + x] as usize
    }

    /// Pixel indices of each segment, in raster order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_segments];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l as usize].push(i);
        }
        out
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut out = vec![0; self.num_segments];
        for &l in &self.labels {
            out[l as usize] += 1;
        }
        out
    }

    /// True when every segment is a single 4-connected component.
    pub fn is_connected(&self) -> bool {
        match Self::connected_components(self.width, self.height, &self.labels) {
            Ok(cc) => cc.num_segments == self.num_segments,
            Err(_) => false,
        }
    }

    /// Pixels whose right or lower 4-neighbour has a different label, plus
    /// the mirrored pixel, so both sides of a boundary are marked.
    pub fn boundary_mask(&self) -> Vec<bool> {
        let (w, h) = (self.width, self.height);
        let mut out = vec![false; w * h];
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                if x + 1 < w && self.labels[i] != self.labels[i + 1] {
                    out[i] = true;
                    out[i + 1] = true;
                }
                if y + 1 < h && self.labels[i] != self.labels[i + w] {
                    out[i] = true;
                    out[i + w] = true;
                }
            }
        }
        out
    }
}

#[inline]
pub(crate) fn neighbors4(
    x: usize,
    y: usize,
    width: usize,
    height: usize,
) -> impl Iterator<Item = usize> {
    let i = y * width + x;
    [
        (x > 0).then(|| i - 1),
        (x + 1 < width).then(|| i + 1),
        (y > 0).then(|| i - width),
        (y + 1 < height).then(|| i + width),
    ]
    .into_iter()
    .flatten()
}

/// Which sampling strategy produced a pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerKind {
    /// Center of mass of each superpixel.
    Com,
    Grid,
    Random,
    /// Three spread samples per superpixel, used by the planar baseline.
    FirstOrder,
    /// Loaded from a file; origin unknown.
    Imported,
}

impl SamplerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SamplerKind::Com => "com",
            SamplerKind::Grid => "grid",
            SamplerKind::Random => "random",
            SamplerKind::FirstOrder => "first-order",
            SamplerKind::Imported => "imported",
        }
    }
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SamplerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "com" => SamplerKind::Com,
            "grid" => SamplerKind::Grid,
            "random" => SamplerKind::Random,
            "first-order" => SamplerKind::FirstOrder,
            "imported" => SamplerKind::Imported,
            other => return Err(Error::param(format!("unknown sampler '{other}'"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub x: usize,
    pub y: usize,
    pub depth: f64,
}

/// Point measurements taken by a sampler, with provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    width: usize,
    height: usize,
    entries: Vec<Sample>,
    sampler: SamplerKind,
    budget: usize,
    /// Pattern coordinates that hit invalid ground truth and were discarded.
    pub dropped: usize,
    /// Pattern coordinates moved to a valid pixel of the same segment.
    pub relocated: usize,
}

impl SampleSet {
    pub fn new(
        width: usize,
        height: usize,
        entries: Vec<Sample>,
        sampler: SamplerKind,
        budget: usize,
    ) -> Result<Self> {
        check_dims(width, height)?;
        if entries.len() > budget {
            return Err(Error::InvalidData(format!(
                "{} samples exceed the budget of {budget}",
                entries.len()
            )));
        }
        let mut seen = HashSet::with_capacity(entries.len());
        for s in &entries {
            if s.x >= width || s.y >= height {
                return Err(Error::InvalidData(format!(
                    "sample ({}, {}) outside {width}x{height}",
                    s.x, s.y
                )));
            }
            if !(s.depth.is_finite() && s.depth >= 0.0) {
                return Err(Error::NegativeDepth {
                    x: s.x,
                    y: s.y,
                    value: s.depth,
                });
            }
            if !seen.insert((s.x, s.y)) {
                return Err(Error::InvalidData(format!(
                    "duplicate sample at ({}, {})",
                    s.x, s.y
                )));
            }
        }
        Ok(Self {
            width,
            height,
            entries,
            sampler,
            budget,
            dropped: 0,
            relocated: 0,
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

    pub fn entries(&self) -> &[Sample] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn sampler(&self) -> SamplerKind {
        self.sampler
    }

    pub fn budget(&self) -> usize {
        self.budget
    }
}

/// Per-pixel inclusion mask for metric evaluation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalMask {
    width: usize,
    height: usize,
    include: Vec<bool>,
}

impl EvalMask {
    pub fn new(width: usize, height: usize, include: Vec<bool>) -> Result<Self> {
        check_dims(width, height)?;
        if include.len() != width * height {
            return Err(Error::InvalidData("mask buffer size mismatch".into()));
        }
        Ok(Self {
            width,
            height,
            include,
        })
    }

    pub fn full(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            include: vec![true; width * height],
        }
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

    pub fn include(&self) -> &[bool] {
        &self.include
    }

    pub fn count(&self) -> usize {
        self.include.iter().filter(|&&b| b).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rgb_rejects_wrong_buffer() {
        assert!(RgbImage::new(2, 2, vec![0; 11]).is_err());
        assert!(RgbImage::new(0, 2, vec![]).is_err());
        let g = RgbImage::from_gray(2, 1, &[10, 20]).unwrap();
        assert_eq!(g.get(1, 0), [20, 20, 20]);
    }

    #[test]
    fn depth_rejects_negative_valid_pixel() {
        assert!(DepthMap::new(2, 1, vec![1.0, -1.0], vec![true, true]).is_err());
        // invalid pixels may hold anything
        assert!(DepthMap::new(2, 1, vec![1.0, f64::NAN], vec![true, false]).is_ok());
    }

    #[test]
    fn segment_map_requires_every_label() {
        assert!(SegmentMap::new(2, 1, vec![0, 2], 3).is_err());
        assert!(SegmentMap::new(2, 1, vec![0, 3], 3).is_err());
        let s = SegmentMap::new(3, 1, vec![1, 0, 1], 2).unwrap();
        assert!(!s.is_connected());
        let cc = SegmentMap::connected_components(3, 1, s.labels()).unwrap();
        assert_eq!(cc.num_segments(), 3);
        assert!(cc.is_connected());
    }

    #[test]
    fn sample_set_invariants() {
        let s = |x, y, d| Sample { x, y, depth: d };
        assert!(SampleSet::new(4, 4, vec![s(0, 0, 1.0), s(0, 0, 2.0)], SamplerKind::Grid, 5).is_err());
        assert!(SampleSet::new(4, 4, vec![s(4, 0, 1.0)], SamplerKind::Grid, 5).is_err());
        assert!(SampleSet::new(4, 4, vec![s(1, 0, -1.0)], SamplerKind::Grid, 5).is_err());
        assert!(SampleSet::new(4, 4, vec![s(1, 0, 1.0), s(2, 0, 1.0)], SamplerKind::Grid, 1).is_err());
        assert!(SampleSet::new(4, 4, vec![s(1, 0, 1.0)], SamplerKind::Grid, 1).is_ok());
    }

    #[test]
    fn sampler_tags_round_trip() {
        for k in [
            SamplerKind::Com,
            SamplerKind::Grid,
            SamplerKind::Random,
            SamplerKind::FirstOrder,
            SamplerKind::Imported,
        ] {
            assert_eq!(k.as_str().parse::<SamplerKind>().unwrap(), k);
        }
        assert!("liu".parse::<SamplerKind>().is_err());
    }
}
