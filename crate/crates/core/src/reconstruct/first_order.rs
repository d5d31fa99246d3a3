use super::pipeline::DepthSensor;
use crate::error::{Error, Result};
use crate::planar::{fit_plane, Plane};
use crate::sampler::{com_location, SamplePattern};
use crate::superpixel::{slic_segment, SlicParams};
use crate::types::{DepthMap, RgbImage, SampleSet, SamplerKind, SegmentMap};

#[derive(Debug, Clone)]
pub struct FirstOrderOutput {
    pub depth: DepthMap,
    pub samples: SampleSet,
    pub segments: SegmentMap,
    pub planes: Vec<Plane>,
    /// Segments whose samples could not define a plane and got their mean.
    pub degenerate_segments: Vec<usize>,
}

fn dist2(a: (usize, usize), b: (usize, usize)) -> i64 {
    let dx = a.0 as i64 - b.0 as i64;
    let dy = a.1 as i64 - b.1 as i64;
    dx * dx + dy * dy
}

fn cross(a: (usize, usize), b: (usize, usize), c: (usize, usize)) -> i64 {
    (b.0 as i64 - a.0 as i64) * (c.1 as i64 - a.1 as i64) - (b.1 as i64 - a.1 as i64) * (c.0 as i64 - a.0 as i64)
}

/// Member maximizing `score`; ties go to smaller `y`, then smaller `x`.
fn argmax_member(members: &[(usize, usize)], score: impl Fn((usize, usize)) -> i64) -> (usize, usize) {
    *members
        .iter()
        .max_by_key(|&&p| (score(p), std::cmp::Reverse((p.1, p.0))))
        .expect("non-empty segment")
}

/// Up to three well-spread positions per segment: the center of mass, the
/// member farthest from it, and the member farthest from both. If that
/// triple is collinear, the third point moves to the member farthest from
/// the line through the first two.
pub fn first_order_pattern(segments: &SegmentMap) -> SamplePattern {
    let w = segments.width();
    let mut coords = Vec::with_capacity(3 * segments.num_segments());
    for (label, members) in segments.members().iter().enumerate() {
        let p1 = com_location(segments, members, label);
        coords.push(p1);
        if members.len() < 2 {
            continue;
        }
        let pts: Vec<(usize, usize)> = members.iter().map(|&i| (i % w, i / w)).collect();
        let p2 = argmax_member(&pts, |p| dist2(p, p1));
        if p2 == p1 {
            continue;
        }
        coords.push(p2);
        if members.len() < 3 {
            continue;
        }
        let mut p3 = argmax_member(&pts, |p| dist2(p, p1).min(dist2(p, p2)));
        if cross(p1, p2, p3) == 0 {
            p3 = argmax_member(&pts, |p| cross(p1, p2, p).abs());
        }
        if p3 != p1 && p3 != p2 {
            coords.push(p3);
        }
    }
    SamplePattern {
        width: segments.width(),
        height: segments.height(),
        budget: coords.len(),
        coords,
        sampler: SamplerKind::FirstOrder,
    }
}

/// Per-segment least-squares planes from the samples inside each segment.
///
/// Segments with fewer than three samples, or collinear ones, take the mean
/// of their samples and are reported as degenerate. Segments without any
/// sample take the value of the nearest sample.
pub fn first_order_reconstruct(segments: &SegmentMap, samples: &SampleSet) -> Result<(DepthMap, Vec<Plane>, Vec<usize>)> {
    crate::types::ensure_same(segments.dims(), samples.dims())?;
    if samples.is_empty() {
        return Err(Error::DegenerateSamples(0));
    }
    let mut per_segment: Vec<Vec<(f64, f64, f64)>> = vec![Vec::new(); segments.num_segments()];
    for s in samples.entries() {
        per_segment[segments.label(s.x, s.y)].push((s.x as f64, s.y as f64, s.depth));
    }
    let w = segments.width();
    let members = segments.members();
    let mut degenerate = Vec::new();
    let mut planes = Vec::with_capacity(per_segment.len());
    for (label, pts) in per_segment.iter().enumerate() {
        let plane = if pts.is_empty() {
            let k = members[label].len() as f64;
            let cx = members[label].iter().map(|&i| (i % w) as f64).sum::<f64>() / k;
            let cy = members[label].iter().map(|&i| (i / w) as f64).sum::<f64>() / k;
            let nearest = samples
                .entries()
                .iter()
                .min_by(|a, b| {
                    let da = (a.x as f64 - cx).powi(2) + (a.y as f64 - cy).powi(2);
                    let db = (b.x as f64 - cx).powi(2) + (b.y as f64 - cy).powi(2);
                    da.total_cmp(&db)
                })
                .expect("non-empty");
            degenerate.push(label);
            Plane::constant(nearest.depth)
        } else {
            match fit_plane(pts) {
                Ok(p) => p,
                Err(_) => {
                    degenerate.push(label);
                    Plane::constant(pts.iter().map(|p| p.2).sum::<f64>() / pts.len() as f64)
                }
            }
        };
        planes.push(plane);
    }
    let depth: Vec<f64> = segments
        .labels()
        .iter()
        .enumerate()
        .map(|(i, &l)| planes[l as usize].eval((i % w) as f64, (i / w) as f64).max(0.0))
        .collect();
    let n = depth.len();
    Ok((DepthMap::from_parts_unchecked(w, segments.height(), depth, vec![true; n]), planes, degenerate))
}

/// Planar baseline: `n / 3` superpixels, three samples and one plane each.
pub fn first_order_baseline(
    image: &RgbImage,
    sensor: &mut impl DepthSensor,
    n: usize,
    slic: &SlicParams,
) -> Result<FirstOrderOutput> {
    if n < 3 {
        return Err(Error::param("first-order reconstruction needs n >= 3"));
    }
    let params = SlicParams {
        target_segments: n / 3,
        ..*slic
    };
    let segments = slic_segment(image, &params)?;
    first_order_on_segments(segments, sensor)
}

/// Three samples per given segment and a plane each.
pub(crate) fn first_order_on_segments(segments: SegmentMap, sensor: &mut impl DepthSensor) -> Result<FirstOrderOutput> {
    let pattern = first_order_pattern(&segments);
    let samples = sensor.measure(&pattern, Some(&segments))?;
    let (depth, planes, degenerate_segments) = first_order_reconstruct(&segments, &samples)?;
    Ok(FirstOrderOutput {
        depth,
        samples,
        segments,
        planes,
        degenerate_segments,
    })
}
