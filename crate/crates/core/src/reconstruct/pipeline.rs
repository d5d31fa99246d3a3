use serde::{Deserialize, Serialize};

use super::nearest::voronoi_partition;
use super::{bilateral_filter, exp_transform, log_transform, zero_order_fill_lenient, BilateralParams, SceneType};
use crate::error::{Error, Result};
use crate::sampler::{com_pattern, execute, GaussianNoise, SamplePattern};
use crate::superpixel::{slic_segment, SlicParams};
use crate::types::{DepthMap, RgbImage, SampleSet, SegmentMap};

/// Anything that can be asked for depth at a set of pixel positions.
pub trait DepthSensor {
    /// `segments`, when given, lets the sensor relocate reads that hit
    /// invalid pixels within the same segment.
    fn measure(&mut self, pattern: &SamplePattern, segments: Option<&SegmentMap>) -> Result<SampleSet>;
}

/// Simulated programmable sensor reading a dense ground-truth map.
#[derive(Debug, Clone, Copy)]
pub struct GroundTruthSensor<'a> {
    pub gt: &'a DepthMap,
    pub noise: Option<GaussianNoise>,
}

impl<'a> GroundTruthSensor<'a> {
    pub fn new(gt: &'a DepthMap) -> Self {
        Self { gt, noise: None }
    }
}

impl DepthSensor for GroundTruthSensor<'_> {
    fn measure(&mut self, pattern: &SamplePattern, segments: Option<&SegmentMap>) -> Result<SampleSet> {
        execute(pattern, self.gt, segments, self.noise)
    }
}

impl<F> DepthSensor for F
where
    F: FnMut(&SamplePattern, Option<&SegmentMap>) -> Result<SampleSet>,
{
    fn measure(&mut self, pattern: &SamplePattern, segments: Option<&SegmentMap>) -> Result<SampleSet> {
        self(pattern, segments)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OursParams {
    /// `target_segments` is overwritten by the budget.
    pub slic: SlicParams,
    pub scene: SceneType,
    /// Explicit filter parameters; derived from the budget and scene when absent.
    pub bilateral: Option<BilateralParams>,
    /// Skip the log-domain filtering (plain zero-order reconstruction).
    pub skip_filter: bool,
}

impl Default for OursParams {
    fn default() -> Self {
        Self {
            slic: SlicParams::default(),
            scene: SceneType::Outdoor,
            bilateral: None,
            skip_filter: false,
        }
    }
}

impl OursParams {
    pub fn bilateral_for(&self, pixels: usize, n: usize) -> BilateralParams {
        self.bilateral
            .unwrap_or_else(|| BilateralParams::for_budget(pixels, n, self.scene))
    }
}

#[derive(Debug, Clone)]
pub struct OursOutput {
    pub depth: DepthMap,
    pub samples: SampleSet,
    pub segments: SegmentMap,
}

/// Superpixels from the image, one sample at each center of mass, zero-order
/// fill, then bilateral smoothing of `log(d + 1)`.
pub fn reconstruct_ours(
    image: &RgbImage,
    sensor: &mut impl DepthSensor,
    n: usize,
    params: &OursParams,
) -> Result<OursOutput> {
    if n == 0 {
        return Err(Error::param("budget n must be >= 1"));
    }
    let slic = SlicParams {
        target_segments: n,
        ..params.slic
    };
    let segments = slic_segment(image, &slic)?;
    let pattern = com_pattern(&segments);
    let samples = sensor.measure(&pattern, Some(&segments))?;
    let bilateral = params.bilateral_for(image.len(), n);
    let depth = reconstruct_from_samples(&segments, &samples, (!params.skip_filter).then_some(&bilateral))?;
    Ok(OursOutput {
        depth,
        samples,
        segments,
    })
}

/// Reconstruction stage alone: zero-order fill over `segments` (or over the
/// nearest-sample cells of `samples` when `segments` is `None`), then the
/// optional log-domain bilateral pass.
pub fn reconstruct_from_samples(
    segments: &SegmentMap,
    samples: &SampleSet,
    bilateral: Option<&BilateralParams>,
) -> Result<DepthMap> {
    let d0 = zero_order_fill_lenient(segments, samples)?;
    match bilateral {
        None => Ok(d0),
        Some(p) => exp_transform(&bilateral_filter(&log_transform(&d0)?, p)?),
    }
}

/// Same reconstruction for patterns without superpixels: each sample owns its
/// nearest-sample cell.
pub fn reconstruct_unsegmented(samples: &SampleSet, bilateral: Option<&BilateralParams>) -> Result<DepthMap> {
    if samples.is_empty() {
        return Err(Error::DegenerateSamples(0));
    }
    let cells = voronoi_partition(samples.entries(), samples.width(), samples.height());
    reconstruct_from_samples(&cells, samples, bilateral)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{rmse, NO_CAP};
    use crate::types::EvalMask;

    #[test]
    fn constant_scene_is_exact() {
        let img = RgbImage::from_fn(40, 30, |x, y| [(x * 6) as u8, (y * 8) as u8, 90]).unwrap();
        let gt = DepthMap::constant(40, 30, 7.25).unwrap();
        for n in [1, 13, 60] {
            let out = reconstruct_ours(&img, &mut GroundTruthSensor::new(&gt), n, &OursParams::default()).unwrap();
            let e = rmse(&gt, &out.depth, &EvalMask::full(40, 30), NO_CAP).unwrap();
            assert!(e <= 1e-9, "n={n}: {e}");
        }
    }

    #[test]
    fn closure_sensor() {
        let img = RgbImage::filled(20, 20, [10, 10, 10]).unwrap();
        let gt = DepthMap::constant(20, 20, 3.0).unwrap();
        let mut calls = 0;
        let mut sensor = |p: &SamplePattern, s: Option<&SegmentMap>| {
            calls += 1;
            execute(p, &gt, s, None)
        };
        let out = reconstruct_ours(&img, &mut sensor, 4, &OursParams::default()).unwrap();
        assert_eq!(calls, 1);
        assert_eq!(out.samples.len(), out.segments.num_segments());
    }

    #[test]
    fn unsegmented_zero_order_is_nearest_neighbour() {
        let gt = DepthMap::from_fn(10, 1, |x, _| x as f64).unwrap();
        let p = crate::sampler::grid_pattern(10, 1, 2).unwrap();
        let s = execute(&p, &gt, None, None).unwrap();
        let d = reconstruct_unsegmented(&s, None).unwrap();
        assert_eq!(d.depth(), &[2.0, 2.0, 2.0, 2.0, 2.0, 7.0, 7.0, 7.0, 7.0, 7.0]);
    }
}
