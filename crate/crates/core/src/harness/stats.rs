//! Per-image planar-model and edge statistics, and their dataset summaries.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::run::write_csv;
use super::synthetic::SyntheticScene;
use crate::edgestats::{conditional_probability, depth_boundaries, rgb_edges};
use crate::error::Result;
use crate::metrics::{rmse, NO_CAP};
use crate::planar::{fit_model, min_samples_mean};
use crate::reconstruct::GroundTruthSensor;
use crate::types::{DepthMap, EvalMask, RgbImage};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageStatistics {
    pub image: String,
    /// Number of planar regions N.
    pub regions: usize,
    /// Fraction of pixels outside every region.
    pub delta: f64,
    /// RMSE of the planar model on covered pixels, meters.
    pub epsilon: f64,
    pub min_samples: usize,
    /// Empty when the image has no depth boundary.
    pub p_rgb_given_d: Option<f64>,
    /// Empty when the image has no RGB edge.
    pub p_d_given_rgb: Option<f64>,
}

pub fn image_statistics(id: &str, rgb: &RgbImage, depth: &DepthMap, cfg: &ExperimentConfig) -> Result<ImageStatistics> {
    let model = fit_model(depth, &cfg.planar)?;
    let b_d = depth_boundaries(depth, cfg.depth_rel_threshold)?;
    let b_rgb = rgb_edges(rgb, &cfg.edges)?;
    Ok(ImageStatistics {
        image: id.to_string(),
        regions: model.stats.regions,
        delta: model.stats.delta,
        epsilon: model.stats.epsilon,
        min_samples: model.min_samples(),
        p_rgb_given_d: conditional_probability(&b_rgb, &b_d, cfg.edge_tol_px).ok(),
        p_d_given_rgb: conditional_probability(&b_d, &b_rgb, cfg.edge_tol_px).ok(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// Equal-width bins over `[min, max]` of the values; the last bin is closed.
pub fn histogram(values: &[f64], bins: usize) -> Vec<HistogramBin> {
    if values.is_empty() || bins == 0 {
        return Vec::new();
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; bins];
    for &v in values {
        let k = (((v - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(k, count)| HistogramBin {
            lo: lo + k as f64 * width,
            hi: lo + (k + 1) as f64 * width,
            count,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStatistics {
    pub images: Vec<ImageStatistics>,
    pub mean_regions: f64,
    pub mean_delta: f64,
    pub mean_epsilon: f64,
    /// `3 * mean_regions`.
    pub mean_min_samples: f64,
    pub mean_p_rgb_given_d: Option<f64>,
    pub mean_p_d_given_rgb: Option<f64>,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

impl DatasetStatistics {
    pub fn from_images(mut images: Vec<ImageStatistics>) -> Self {
        images.sort_by(|a, b| a.image.cmp(&b.image));
        let col = |f: &dyn Fn(&ImageStatistics) -> Option<f64>| images.iter().filter_map(f).collect::<Vec<f64>>();
        let mean_regions = mean(&col(&|s| Some(s.regions as f64))).unwrap_or(0.0);
        Self {
            mean_regions,
            mean_delta: mean(&col(&|s| Some(s.delta))).unwrap_or(0.0),
            mean_epsilon: mean(&col(&|s| Some(s.epsilon))).unwrap_or(0.0),
            mean_min_samples: min_samples_mean(mean_regions),
            mean_p_rgb_given_d: mean(&col(&|s| s.p_rgb_given_d)),
            mean_p_d_given_rgb: mean(&col(&|s| s.p_d_given_rgb)),
            images,
        }
    }

    /// `statistics.csv` and one `hist_<column>.csv` per statistic (10 bins).
    pub fn write(&self, dir: &Path) -> Result<()> {
        write_csv(&dir.join("statistics.csv"), &self.images)?;
        let columns: [(&str, Vec<f64>); 5] = [
            ("regions", self.images.iter().map(|s| s.regions as f64).collect()),
            ("delta", self.images.iter().map(|s| s.delta).collect()),
            ("epsilon", self.images.iter().map(|s| s.epsilon).collect()),
            ("p_rgb_given_d", self.images.iter().filter_map(|s| s.p_rgb_given_d).collect()),
            ("p_d_given_rgb", self.images.iter().filter_map(|s| s.p_d_given_rgb).collect()),
        ];
        for (name, values) in columns {
            write_csv(&dir.join(format!("hist_{name}.csv")), &histogram(&values, 10))?;
        }
        Ok(())
    }
}

/// Result of sampling three points per true region and fitting a plane each.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalScenario {
    pub regions: usize,
    pub samples: usize,
    pub rmse: f64,
}

/// Best case for a piecewise-planar scene: segmentation equal to the true
/// regions, three samples in each, one plane per region.
pub fn optimal_scenario(scene: &SyntheticScene) -> Result<OptimalScenario> {
    let out = crate::reconstruct::first_order_on_segments(scene.regions.clone(), &mut GroundTruthSensor::new(&scene.depth))?;
    let (w, h) = scene.depth.dims();
    Ok(OptimalScenario {
        regions: scene.regions.num_segments(),
        samples: out.samples.len(),
        rmse: rmse(&scene.depth, &out.depth, &EvalMask::full(w, h), NO_CAP)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_counts_everything() {
        let h = histogram(&[0.0, 0.1, 0.5, 1.0, 1.0], 4);
        assert_eq!(h.len(), 4);
        assert_eq!(h.iter().map(|b| b.count).sum::<usize>(), 5);
        assert_eq!(h[3].count, 2);
        assert_eq!(histogram(&[3.0, 3.0], 2)[0].count, 2);
    }
}
