//! Dense depth from sparse samples.
//!
//! The main pipeline is zero-order fill over superpixels, a move to
//! `log(d + 1)`, one bilateral pass, and the inverse transform. Baselines:
//! Delaunay-linear interpolation and per-superpixel planes from three samples.

mod bilateral;
mod bilinear;
mod first_order;
mod nearest;
mod pipeline;

pub use bilateral::{bilateral_filter, BilateralParams, SceneType};
pub use bilinear::{bilinear_baseline, DelaunayInterpolant};
pub(crate) use first_order::first_order_on_segments;
pub use first_order::{first_order_baseline, first_order_pattern, first_order_reconstruct, FirstOrderOutput};
pub use pipeline::{
    reconstruct_from_samples, reconstruct_ours, reconstruct_unsegmented, DepthSensor, GroundTruthSensor, OursOutput, OursParams,
};

use crate::error::{Error, Result};
use crate::types::{DepthMap, SampleSet, SegmentMap};

/// Every pixel of segment `i` takes the depth of the one sample inside it.
pub fn zero_order_fill(segments: &SegmentMap, samples: &SampleSet) -> Result<DepthMap> {
    let values = segment_values(segments, samples)?;
    if let Some(i) = values.iter().position(Option::is_none) {
        return Err(Error::SegmentWithoutSample(i));
    }
    Ok(paint(segments, &values))
}

fn paint(segments: &SegmentMap, values: &[Option<f64>]) -> DepthMap {
    let out: Vec<f64> = segments.labels().iter().map(|&l| values[l as usize].unwrap_or_default()).collect();
    let n = out.len();
    DepthMap::from_parts_unchecked(segments.width(), segments.height(), out, vec![true; n])
}

/// Zero-order fill that tolerates unsampled segments: they take the value of
/// the sample nearest to their center of mass.
pub(crate) fn zero_order_fill_lenient(segments: &SegmentMap, samples: &SampleSet) -> Result<DepthMap> {
    let mut values = segment_values(segments, samples)?;
    if values.iter().any(Option::is_none) {
        if samples.is_empty() {
            return Err(Error::DegenerateSamples(0));
        }
        let w = segments.width();
        for (label, members) in segments.members().iter().enumerate() {
            if values[label].is_some() {
                continue;
            }
            let k = members.len() as f64;
            let cx = members.iter().map(|&i| (i % w) as f64).sum::<f64>() / k;
            let cy = members.iter().map(|&i| (i / w) as f64).sum::<f64>() / k;
            let nearest = samples
                .entries()
                .iter()
                .min_by(|a, b| {
                    let da = (a.x as f64 - cx).powi(2) + (a.y as f64 - cy).powi(2);
                    let db = (b.x as f64 - cx).powi(2) + (b.y as f64 - cy).powi(2);
                    da.total_cmp(&db)
                })
                .expect("non-empty");
            values[label] = Some(nearest.depth);
        }
    }
    Ok(paint(segments, &values))
}

fn segment_values(segments: &SegmentMap, samples: &SampleSet) -> Result<Vec<Option<f64>>> {
    crate::types::ensure_same(segments.dims(), samples.dims())?;
    let mut values: Vec<Option<f64>> = vec![None; segments.num_segments()];
    for s in samples.entries() {
        let l = segments.label(s.x, s.y);
        if values[l].is_some() {
            return Err(Error::MultipleSamplesInSegment(l));
        }
        values[l] = Some(s.depth);
    }
    Ok(values)
}

/// Elementwise `ln(d + 1)` on valid pixels.
pub fn log_transform(d: &DepthMap) -> Result<DepthMap> {
    let mut out = d.depth().to_vec();
    for (i, (v, &ok)) in out.iter_mut().zip(d.valid()).enumerate() {
        if !ok {
            continue;
        }
        if *v < 0.0 {
            return Err(Error::NegativeDepth {
                x: i % d.width(),
                y: i / d.width(),
                value: *v,
            });
        }
        *v = v.ln_1p();
    }
    Ok(DepthMap::from_parts_unchecked(d.width(), d.height(), out, d.valid().to_vec()))
}

/// Elementwise `exp(d) - 1` on valid pixels; inverse of [`log_transform`].
///
/// Results are clamped at zero so the output stays a valid depth map even
/// for log-domain inputs below zero.
pub fn exp_transform(d: &DepthMap) -> Result<DepthMap> {
    let mut out = d.depth().to_vec();
    for (v, &ok) in out.iter_mut().zip(d.valid()) {
        if ok {
            if !v.is_finite() {
                return Err(Error::InvalidData(format!("non-finite log depth {v}")));
            }
            *v = v.exp_m1().max(0.0);
        }
    }
    Ok(DepthMap::from_parts_unchecked(d.width(), d.height(), out, d.valid().to_vec()))
}
