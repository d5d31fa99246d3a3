use spade::{DelaunayTriangulation, Point2, Triangulation};

use super::nearest::NearestSampleIndex;
use crate::error::{Error, Result};
use crate::types::{DepthMap, Sample, SampleSet};

#[derive(Debug, Clone, Copy)]
struct Triangle {
    p: [(f64, f64); 3],
    v: [f64; 3],
}

impl Triangle {
    /// Barycentric weights of `(x, y)`, or `None` when outside.
    fn weights(&self, x: f64, y: f64) -> Option<[f64; 3]> {
        let [(x0, y0), (x1, y1), (x2, y2)] = self.p;
        let det = (y1 - y2) * (x0 - x2) + (x2 - x1) * (y0 - y2);
        let l0 = ((y1 - y2) * (x - x2) + (x2 - x1) * (y - y2)) / det;
        let l1 = ((y2 - y0) * (x - x2) + (x0 - x2) * (y - y2)) / det;
        let l2 = 1.0 - l0 - l1;
        const EPS: f64 = -1e-12;
        (l0 >= EPS && l1 >= EPS && l2 >= EPS).then_some([l0, l1, l2])
    }

    fn interpolate(&self, w: [f64; 3]) -> f64 {
        w[0] * self.v[0] + w[1] * self.v[1] + w[2] * self.v[2]
    }
}

/// Piecewise-linear interpolant over the Delaunay triangulation of the
/// sample positions, with nearest-sample values outside the convex hull.
///
/// Samples are inserted in their stored order; cocircular configurations are
/// resolved deterministically by that order.
pub struct DelaunayInterpolant {
    samples: Vec<Sample>,
    triangles: Vec<Triangle>,
}

impl DelaunayInterpolant {
    pub fn new(samples: &[Sample]) -> Result<Self> {
        if samples.len() < 3 {
            return Err(Error::DegenerateSamples(samples.len()));
        }
        let mut tri: DelaunayTriangulation<Point2<f64>> = DelaunayTriangulation::new();
        let mut values = Vec::with_capacity(samples.len());
        for s in samples {
            let h = tri
                .insert(Point2::new(s.x as f64, s.y as f64))
                .map_err(|e| Error::InvalidData(format!("triangulation failed: {e:?}")))?;
            debug_assert_eq!(h.index(), values.len());
            values.push(s.depth);
        }
        if tri.num_inner_faces() == 0 {
            return Err(Error::DegenerateSamples(samples.len()));
        }
        let triangles = tri
            .inner_faces()
            .map(|f| {
                let vs = f.vertices();
                let pos = |i: usize| {
                    let p = vs[i].position();
                    (p.x, p.y)
                };
                Triangle {
                    p: [pos(0), pos(1), pos(2)],
                    v: [values[vs[0].fix().index()], values[vs[1].fix().index()], values[vs[2].fix().index()]],
                }
            })
            .collect();
        Ok(Self {
            samples: samples.to_vec(),
            triangles,
        })
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Value at an arbitrary point (linear scan; use [`Self::rasterize`] for images).
    pub fn value_at(&self, x: f64, y: f64) -> f64 {
        for t in &self.triangles {
            if let Some(w) = t.weights(x, y) {
                return t.interpolate(w);
            }
        }
        let idx = NearestSampleIndex::new(&self.samples, 1, 1);
        self.samples[idx.nearest(x, y)].depth
    }

    pub fn rasterize(&self, width: usize, height: usize) -> DepthMap {
        let mut out = vec![0.0; width * height];
        let mut covered = vec![false; width * height];
        for t in &self.triangles {
            let xs = t.p.map(|p| p.0);
            let ys = t.p.map(|p| p.1);
            let x0 = xs.iter().copied().fold(f64::INFINITY, f64::min).max(0.0).ceil() as usize;
            let x1 = (xs.iter().copied().fold(f64::NEG_INFINITY, f64::max).floor() as usize).min(width - 1);
            let y0 = ys.iter().copied().fold(f64::INFINITY, f64::min).max(0.0).ceil() as usize;
            let y1 = (ys.iter().copied().fold(f64::NEG_INFINITY, f64::max).floor() as usize).min(height - 1);
            for y in y0..=y1 {
                for x in x0..=x1 {
                    let i = y * width + x;
                    if covered[i] {
                        continue;
                    }
                    if let Some(w) = t.weights(x as f64, y as f64) {
                        out[i] = t.interpolate(w);
                        covered[i] = true;
                    }
                }
            }
        }
        if covered.iter().any(|c| !c) {
            let idx = NearestSampleIndex::new(&self.samples, width, height);
            for (i, v) in out.iter_mut().enumerate() {
                if !covered[i] {
                    *v = self.samples[idx.nearest((i % width) as f64, (i / width) as f64)].depth;
                }
            }
        }
        DepthMap::from_parts_unchecked(width, height, out, vec![true; width * height])
    }
}

/// Delaunay-linear interpolation of scattered samples onto the full grid.
pub fn bilinear_baseline(samples: &SampleSet, width: usize, height: usize) -> Result<DepthMap> {
    crate::types::ensure_same((width, height), samples.dims())?;
    Ok(DelaunayInterpolant::new(samples.entries())?.rasterize(width, height))
}
