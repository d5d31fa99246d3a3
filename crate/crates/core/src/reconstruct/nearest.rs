use crate::types::{Sample, SegmentMap};

/// Exact Euclidean nearest-sample lookup on a bucket grid.
pub(crate) struct NearestSampleIndex<'a> {
    samples: &'a [Sample],
    cell: f64,
    bw: usize,
    bh: usize,
    buckets: Vec<Vec<u32>>,
}

impl<'a> NearestSampleIndex<'a> {
    pub(crate) fn new(samples: &'a [Sample], width: usize, height: usize) -> Self {
        assert!(!samples.is_empty());
        let cell = ((width * height) as f64 / samples.len() as f64).sqrt().max(1.0);
        let bw = (width as f64 / cell).ceil().max(1.0) as usize;
        let bh = (height as f64 / cell).ceil().max(1.0) as usize;
        let mut buckets = vec![Vec::new(); bw * bh];
        for (k, s) in samples.iter().enumerate() {
            let bx = ((s.x as f64 / cell) as usize).min(bw - 1);
            let by = ((s.y as f64 / cell) as usize).min(bh - 1);
            buckets[by * bw + bx].push(k as u32);
        }
        Self {
            samples,
            cell,
            bw,
            bh,
            buckets,
        }
    }

    /// Index of the nearest sample; ties go to the lower index.
    pub(crate) fn nearest(&self, x: f64, y: f64) -> usize {
        let qx = ((x / self.cell).max(0.0) as usize).min(self.bw - 1) as i64;
        let qy = ((y / self.cell).max(0.0) as usize).min(self.bh - 1) as i64;
        let mut best = (f64::INFINITY, usize::MAX);
        let max_ring = self.bw.max(self.bh) as i64;
        for ring in 0..=max_ring {
            for by in (qy - ring)..=(qy + ring) {
                if by < 0 || by >= self.bh as i64 {
                    continue;
                }
                let on_edge_row = by == qy - ring || by == qy + ring;
                let mut bx = qx - ring;
                while bx <= qx + ring {
                    if bx >= 0 && bx < self.bw as i64 {
                        for &k in &self.buckets[by as usize * self.bw + bx as usize] {
                            let s = &self.samples[k as usize];
                            let d = (s.x as f64 - x).powi(2) + (s.y as f64 - y).powi(2);
                            let k = k as usize;
                            if d < best.0 || (d == best.0 && k < best.1) {
                                best = (d, k);
                            }
                        }
                    }
                    bx += if on_edge_row || ring == 0 { 1 } else { 2 * ring };
                }
            }
            let reach = ring as f64 * self.cell;
            if best.1 != usize::MAX && best.0 < reach * reach {
                break;
            }
        }
        best.1
    }
}

/// Partition of the image into nearest-sample cells, labelled by sample index.
pub(crate) fn voronoi_partition(samples: &[Sample], width: usize, height: usize) -> SegmentMap {
    let index = NearestSampleIndex::new(samples, width, height);
    let labels: Vec<u32> = (0..width * height)
        .map(|i| index.nearest((i % width) as f64, (i / width) as f64) as u32)
        .collect();
    SegmentMap::from_parts_unchecked(width, height, labels, samples.len())
}
