use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::DepthMap;

/// Road scenes tolerate larger relative depth steps inside a surface than rooms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SceneType {
    #[default]
    Outdoor,
    Indoor,
}

impl SceneType {
    /// Default range sigma in log-depth units.
    pub fn range_sigma(self) -> f64 {
        match self {
            SceneType::Outdoor => 0.08,
            SceneType::Indoor => 0.05,
        }
    }
}

impl std::str::FromStr for SceneType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "outdoor" | "road" => Ok(SceneType::Outdoor),
            "indoor" | "room" => Ok(SceneType::Indoor),
            other => Err(Error::param(format!("unknown scene type '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BilateralParams {
    /// Pixels.
    pub spatial_sigma: f64,
    /// Units of the filtered signal (log depth in the pipeline).
    pub range_sigma: f64,
    /// Half side of the square window, pixels.
    pub window_radius: usize,
}

impl BilateralParams {
    pub fn new(spatial_sigma: f64, range_sigma: f64) -> Self {
        Self {
            spatial_sigma,
            range_sigma,
            window_radius: (2.0 * spatial_sigma).ceil().max(1.0) as usize,
        }
    }

    /// Spatial sigma tied to the superpixel pitch `sqrt(pixels / n)`.
    pub fn for_budget(pixels: usize, n: usize, scene: SceneType) -> Self {
        let pitch = (pixels as f64 / n.max(1) as f64).sqrt();
        Self::new(0.75 * pitch, scene.range_sigma())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.spatial_sigma > 0.0 && self.spatial_sigma.is_finite()) {
            return Err(Error::param("spatial_sigma must be > 0"));
        }
        if !(self.range_sigma > 0.0) {
            return Err(Error::param("range_sigma must be > 0"));
        }
        if self.window_radius == 0 {
            return Err(Error::param("window_radius must be > 0"));
        }
        Ok(())
    }
}

/// One pass of the classic bilateral filter on a fully valid map.
///
/// `out(p) = sum_q w(p,q) d(q) / sum_q w(p,q)` with
/// `w = exp(-|p-q|^2 / 2 s^2) * exp(-(d(p)-d(q))^2 / 2 r^2)` over the square
/// window clipped to the image. A range sigma at or below `1e-6` returns the
/// input unchanged.
pub fn bilateral_filter(d: &DepthMap, params: &BilateralParams) -> Result<DepthMap> {
    params.validate()?;
    if !d.is_fully_valid() {
        return Err(Error::InvalidData("bilateral filter needs a fully valid depth map".into()));
    }
    if params.range_sigma <= 1e-6 {
        return Ok(d.clone());
    }
    let (w, h) = d.dims();
    let r = params.window_radius as i64;
    let side = (2 * r + 1) as usize;
    let inv_s = 1.0 / (2.0 * params.spatial_sigma * params.spatial_sigma);
    let inv_r = 1.0 / (2.0 * params.range_sigma * params.range_sigma);
    let spatial: Vec<f64> = (-r..=r)
        .flat_map(|dy| (-r..=r).map(move |dx| (-((dx * dx + dy * dy) as f64) * inv_s).exp()))
        .collect();
    let src = d.depth();

    let mut out = vec![0.0; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        let y0 = (y as i64 - r).max(0) as usize;
        let y1 = (y as i64 + r).min(h as i64 - 1) as usize;
        for (x, o) in row.iter_mut().enumerate() {
            let x0 = (x as i64 - r).max(0) as usize;
            let x1 = (x as i64 + r).min(w as i64 - 1) as usize;
            let center = src[y * w + x];
            // piecewise-constant inputs repeat values along rows; reuse the range weight
            let mut last_value = f64::NAN;
            let mut last_weight = 0.0;
            let mut num = 0.0;
            let mut den = 0.0;
            for qy in y0..=y1 {
                let krow = (qy as i64 - y as i64 + r) as usize * side;
                let srow = &src[qy * w..qy * w + w];
                for qx in x0..=x1 {
                    let v = srow[qx];
                    if v != last_value {
                        let diff = center - v;
                        last_weight = (-(diff * diff) * inv_r).exp();
                        last_value = v;
                    }
                    let wgt = spatial[krow + (qx as i64 - x as i64 + r) as usize] * last_weight;
                    num += wgt * (v - center);
                    den += wgt;
                }
            }
            *o = center + num / den;
        }
    });
    Ok(DepthMap::from_parts_unchecked(w, h, out, d.valid().to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_image_unchanged() {
        let d = DepthMap::constant(9, 7, 2.5).unwrap();
        let f = bilateral_filter(&d, &BilateralParams::new(2.0, 0.1)).unwrap();
        assert!(f.depth().iter().all(|&v| (v - 2.5).abs() < 1e-15));
    }

    #[test]
    fn vanishing_range_sigma_is_identity() {
        let d = DepthMap::from_fn(6, 5, |x, y| (x * 7 + y * 3) as f64 * 0.1).unwrap();
        let f = bilateral_filter(&d, &BilateralParams::new(2.0, 1e-7)).unwrap();
        assert_eq!(f, d);
    }

    #[test]
    fn rejects_invalid_pixels_and_params() {
        let d = DepthMap::new(2, 1, vec![1.0, 1.0], vec![true, false]).unwrap();
        assert!(bilateral_filter(&d, &BilateralParams::new(1.0, 0.1)).is_err());
        let ok = DepthMap::constant(2, 2, 1.0).unwrap();
        assert!(bilateral_filter(&ok, &BilateralParams::new(0.0, 0.1)).is_err());
    }

    #[test]
    fn default_table() {
        let p = BilateralParams::for_budget(10_000, 100, SceneType::Indoor);
        assert!((p.spatial_sigma - 7.5).abs() < 1e-12);
        assert_eq!(p.window_radius, 15);
        assert_eq!(p.range_sigma, 0.05);
        assert_eq!(BilateralParams::for_budget(10_000, 100, SceneType::Outdoor).range_sigma, 0.08);
    }
}
