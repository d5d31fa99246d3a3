//! Error metrics for dense depth reconstructions.
//!
//! A pixel is evaluated when it is included by the mask, the ground truth is
//! valid there, and the ground truth does not exceed `range_cap`. The cap
//! filters on the ground truth only; predictions are never clipped.
//!
//! `rmse` is symmetric in its two depth arguments over a fixed evaluation set.
//! `rel` is not: it normalizes by the ground truth.

use crate::error::{Error, Result};
use crate::types::{ensure_same, DepthMap, EvalMask, SampleSet};

/// No range cap.
pub const NO_CAP: f64 = f64::INFINITY;

fn evaluated<'a>(
    gt: &'a DepthMap,
    pred: &'a DepthMap,
    mask: &'a EvalMask,
    range_cap: f64,
) -> Result<impl Iterator<Item = (usize, f64, f64)> + 'a> {
    ensure_same(gt.dims(), pred.dims())?;
    ensure_same(gt.dims(), mask.dims())?;
    if range_cap.is_nan() || range_cap < 0.0 {
        return Err(Error::param(format!("range cap must be >= 0, got {range_cap}")));
    }
    let include = mask.include();
    let gv = gt.valid();
    let pv = pred.valid();
    for i in 0..include.len() {
        if include[i] && gv[i] && gt.depth()[i] <= range_cap && !pv[i] {
            return Err(Error::InvalidData(format!(
                "prediction invalid at evaluated pixel ({}, {})",
                i % gt.width(),
                i / gt.width()
            )));
        }
    }
    Ok(gt
        .depth()
        .iter()
        .zip(pred.depth())
        .enumerate()
        .filter(move |&(i, (&g, _))| include[i] && gv[i] && g <= range_cap)
        .map(|(i, (&g, &p))| (i, g, p)))
}

/// Root mean squared error in meters.
pub fn rmse(gt: &DepthMap, pred: &DepthMap, mask: &EvalMask, range_cap: f64) -> Result<f64> {
    let (sum, count) = evaluated(gt, pred, mask, range_cap)?
        .fold((0.0, 0usize), |(s, c), (_, g, p)| (s + (g - p) * (g - p), c + 1));
    if count == 0 {
        return Err(Error::EmptyEvaluationSet);
    }
    Ok((sum / count as f64).sqrt())
}

/// Mean absolute relative error, `mean(|gt - pred| / gt)`.
pub fn rel(gt: &DepthMap, pred: &DepthMap, mask: &EvalMask, range_cap: f64) -> Result<f64> {
    let width = gt.width();
    let mut sum = 0.0;
    let mut count = 0usize;
    for (i, g, p) in evaluated(gt, pred, mask, range_cap)? {
        if g == 0.0 {
            return Err(Error::ZeroDepth {
                x: i % width,
                y: i / width,
            });
        }
        sum += (g - p).abs() / g;
        count += 1;
    }
    if count == 0 {
        return Err(Error::EmptyEvaluationSet);
    }
    Ok(sum / count as f64)
}

/// Sampled pixels over total pixels.
pub fn pixel_density(samples: &SampleSet, image: &DepthMap) -> f64 {
    samples.len() as f64 / image.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Sample, SamplerKind};

    fn row(values: &[f64]) -> DepthMap {
        DepthMap::dense(values.len(), 1, values.to_vec()).unwrap()
    }

    #[test]
    fn rmse_examples() {
        let full = EvalMask::full(4, 1);
        let gt = row(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(rmse(&gt, &gt, &full, NO_CAP).unwrap(), 0.0);
        let pred = row(&[1.0, 2.0, 3.0, 6.0]);
        assert!((rmse(&gt, &pred, &full, NO_CAP).unwrap() - 1.0).abs() < 1e-15);
        let two = DepthMap::constant(5, 3, 2.0).unwrap();
        let three = DepthMap::constant(5, 3, 3.0).unwrap();
        assert!((rmse(&two, &three, &EvalMask::full(5, 3), NO_CAP).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rel_examples() {
        let full = EvalMask::full(2, 1);
        let gt = row(&[1.0, 2.0]);
        assert_eq!(rel(&gt, &gt, &full, NO_CAP).unwrap(), 0.0);
        let pred = row(&[2.0, 3.0]);
        assert!((rel(&gt, &pred, &full, NO_CAP).unwrap() - 0.75).abs() < 1e-15);
        let two = DepthMap::constant(3, 3, 2.0).unwrap();
        let three = DepthMap::constant(3, 3, 3.0).unwrap();
        assert!((rel(&two, &three, &EvalMask::full(3, 3), NO_CAP).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rel_rejects_zero_ground_truth() {
        let gt = row(&[0.0, 2.0]);
        let err = rel(&gt, &gt, &EvalMask::full(2, 1), NO_CAP).unwrap_err();
        assert!(matches!(err, Error::ZeroDepth { x: 0, y: 0 }));
    }

    #[test]
    fn empty_set_is_an_error_not_zero() {
        let gt = row(&[150.0, 200.0]);
        let err = rmse(&gt, &gt, &EvalMask::full(2, 1), 100.0).unwrap_err();
        assert!(matches!(err, Error::EmptyEvaluationSet));
        let none = EvalMask::new(2, 1, vec![false, false]).unwrap();
        assert!(rmse(&gt, &gt, &none, NO_CAP).is_err());
        let invalid = DepthMap::new(2, 1, vec![1.0, 1.0], vec![false, false]).unwrap();
        assert!(rel(&invalid, &invalid, &EvalMask::full(2, 1), NO_CAP).is_err());
    }

    #[test]
    fn range_cap_filters_ground_truth_only() {
        let gt = row(&[50.0, 150.0]);
        let pred = row(&[250.0, 0.0]);
        // only the first pixel survives; the prediction is not clipped
        let r = rmse(&gt, &pred, &EvalMask::full(2, 1), 100.0).unwrap();
        assert!((r - 200.0).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        let a = row(&[1.0, 2.0]);
        let b = row(&[1.0, 2.0, 3.0]);
        assert!(matches!(
            rmse(&a, &b, &EvalMask::full(2, 1), NO_CAP),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn density_examples() {
        let img = DepthMap::constant(304, 228, 1.0).unwrap();
        let entries: Vec<Sample> = (0..200)
            .map(|i| Sample {
                x: i % 304,
                y: i / 304,
                depth: 1.0,
            })
            .collect();
        let s = SampleSet::new(304, 228, entries, SamplerKind::Random, 200).unwrap();
        assert!((pixel_density(&s, &img) - 200.0 / 69312.0).abs() < 1e-15);
        let empty = SampleSet::new(304, 228, vec![], SamplerKind::Random, 200).unwrap();
        assert_eq!(pixel_density(&empty, &img), 0.0);
    }
}
