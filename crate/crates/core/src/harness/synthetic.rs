//! Piecewise-planar synthetic scenes with colors aligned to depth regions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::planar::Plane;
use crate::types::{DepthMap, EvalMask, RgbImage, SegmentMap};

/// Axis-aligned object drawn in front of the background regions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
    pub depth_m: f64,
    /// Keep the background colors, so no RGB edge marks the object.
    #[serde(default)]
    pub camouflage: bool,
}

impl ObjectSpec {
    fn overlaps(&self, o: &ObjectSpec) -> bool {
        self.x < o.x + o.width && o.x < self.x + self.width && self.y < o.y + o.height && o.y < self.y + self.height
    }

    pub fn area(&self) -> usize {
        self.width * self.height
    }
}

/// Objects placed at random, non-overlapping, with a two pixel gap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomObjects {
    pub count: usize,
    pub min_width: usize,
    pub max_width: usize,
    pub min_length: usize,
    pub max_length: usize,
    /// Object depth as a fraction of the nearest background depth behind it.
    pub min_depth_ratio: f64,
    pub max_depth_ratio: f64,
    #[serde(default)]
    pub camouflage: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    /// Number of rectangular planar regions (guillotine splits of the frame).
    pub regions: usize,
    /// Largest plane slope, meters per pixel, per axis.
    pub max_slope: f64,
    pub near_m: f64,
    pub far_m: f64,
    pub objects: Vec<ObjectSpec>,
    pub random_objects: Option<RandomObjects>,
    /// Additive Gaussian depth noise, meters.
    pub noise_sigma: f64,
    /// Uniform RGB noise amplitude, levels.
    pub texture: f64,
    /// Region color is a fixed gray for every region (camouflage walls).
    pub uniform_color: bool,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            width: 64,
            height: 48,
            regions: 3,
            max_slope: 0.01,
            near_m: 2.0,
            far_m: 8.0,
            objects: Vec::new(),
            random_objects: None,
            noise_sigma: 0.0,
            texture: 3.0,
            uniform_color: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenePreset {
    /// Three slanted planes, nothing else.
    Planes,
    /// Room-like tiling of slanted walls with small objects.
    Indoor,
    /// Few background planes with thin poles in front.
    Obstacle,
    /// One uniform gray wall with a same-colored box in front.
    Camouflage,
}

impl SceneSpec {
    pub fn preset(preset: ScenePreset) -> Self {
        match preset {
            ScenePreset::Planes => SceneSpec {
                texture: 2.0,
                ..SceneSpec::default()
            },
            ScenePreset::Indoor => SceneSpec {
                width: 128,
                height: 96,
                regions: 8,
                max_slope: 0.02,
                near_m: 2.0,
                far_m: 6.0,
                random_objects: Some(RandomObjects {
                    count: 6,
                    min_width: 2,
                    max_width: 6,
                    min_length: 8,
                    max_length: 24,
                    min_depth_ratio: 0.5,
                    max_depth_ratio: 0.8,
                    camouflage: false,
                }),
                texture: 4.0,
                ..SceneSpec::default()
            },
            ScenePreset::Obstacle => SceneSpec {
                regions: 3,
                max_slope: 0.02,
                near_m: 4.0,
                far_m: 10.0,
                random_objects: Some(RandomObjects {
                    count: 3,
                    min_width: 2,
                    max_width: 5,
                    min_length: 18,
                    max_length: 36,
                    min_depth_ratio: 0.3,
                    max_depth_ratio: 0.6,
                    camouflage: false,
                }),
                ..SceneSpec::default()
            },
            ScenePreset::Camouflage => SceneSpec {
                regions: 1,
                max_slope: 0.02,
                near_m: 5.0,
                far_m: 5.0,
                objects: vec![ObjectSpec {
                    x: 24,
                    y: 16,
                    width: 14,
                    height: 12,
                    depth_m: 2.5,
                    camouflage: true,
                }],
                texture: 0.0,
                uniform_color: true,
                ..SceneSpec::default()
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width < 4 || self.height < 4 {
            return Err(Error::param("scene must be at least 4x4"));
        }
        if self.regions == 0 || self.regions * 4 > self.width * self.height {
            return Err(Error::param("regions must be >= 1 and leave >= 4 pixels each"));
        }
        if !(self.near_m > 0.0 && self.far_m >= self.near_m && self.far_m.is_finite()) {
            return Err(Error::param("need 0 < near_m <= far_m"));
        }
        if !(self.max_slope >= 0.0 && self.noise_sigma >= 0.0 && self.texture >= 0.0) {
            return Err(Error::param("slope, noise and texture must be >= 0"));
        }
        for (k, o) in self.objects.iter().enumerate() {
            if o.width == 0 || o.height == 0 || o.x + o.width > self.width || o.y + o.height > self.height {
                return Err(Error::param(format!("object {k} is empty or outside the frame")));
            }
            if !(o.depth_m > 0.0 && o.depth_m.is_finite()) {
                return Err(Error::param(format!("object {k} needs a positive depth")));
            }
            if let Some(j) = self.objects[..k].iter().position(|p| p.overlaps(o)) {
                return Err(Error::param(format!("objects {j} and {k} overlap")));
            }
        }
        if let Some(r) = &self.random_objects {
            if r.min_width == 0 || r.min_width > r.max_width || r.min_length == 0 || r.min_length > r.max_length {
                return Err(Error::param("random object size ranges are empty"));
            }
            if !(r.min_depth_ratio > 0.0 && r.min_depth_ratio <= r.max_depth_ratio) {
                return Err(Error::param("random object depth ratios need 0 < min <= max"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub rgb: RgbImage,
    pub depth: DepthMap,
    /// Pixels covered by objects.
    pub obstacle_mask: EvalMask,
    /// 4-connected components of the true surfaces (regions and objects).
    pub regions: SegmentMap,
    /// Noise-free plane of each entry of `regions`.
    pub planes: Vec<Plane>,
    /// Objects actually drawn, including randomly placed ones.
    pub objects: Vec<ObjectSpec>,
}

fn hsv(h: f64, s: f64, v: f64) -> [f64; 3] {
    let h = h.rem_euclid(1.0) * 6.0;
    let c = v * s;
    let x = c * (1.0 - (h % 2.0 - 1.0).abs());
    let (r, g, b) = match h as usize {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [(r + m) * 255.0, (g + m) * 255.0, (b + m) * 255.0]
}

#[derive(Debug, Clone, Copy)]
struct Rect {
    x: usize,
    y: usize,
    w: usize,
    h: usize,
}

fn guillotine(width: usize, height: usize, count: usize, rng: &mut ChaCha8Rng) -> Vec<Rect> {
    let mut rects = vec![Rect {
        x: 0,
        y: 0,
        w: width,
        h: height,
    }];
    while rects.len() < count {
        let (k, _) = rects
            .iter()
            .enumerate()
            .max_by_key(|(k, r)| (r.w * r.h, std::cmp::Reverse(*k)))
            .expect("non-empty");
        let r = rects[k];
        let vertical = r.w >= r.h;
        let span = if vertical { r.w } else { r.h };
        if span < 4 {
            break;
        }
        let cut = rng.random_range((span * 3 / 10).max(2)..=(span * 7 / 10).min(span - 2));
        let (a, b) = if vertical {
            (Rect { w: cut, ..r }, Rect { x: r.x + cut, w: r.w - cut, ..r })
        } else {
            (Rect { h: cut, ..r }, Rect { y: r.y + cut, h: r.h - cut, ..r })
        };
        rects[k] = a;
        rects.push(b);
    }
    rects
}

/// Builds a scene; identical `(spec, seed)` give identical scenes.
pub fn generate_synthetic_scene(spec: &SceneSpec, seed: u64) -> Result<SyntheticScene> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rects = guillotine(w, h, spec.regions, &mut rng);

    // evenly spaced base depths, shuffled, so neighbouring regions differ
    let k = rects.len();
    let mut levels: Vec<f64> = (0..k)
        .map(|i| {
            if k == 1 {
                (spec.near_m + spec.far_m) / 2.0
            } else {
                spec.near_m + (spec.far_m - spec.near_m) * i as f64 / (k - 1) as f64
            }
        })
        .collect();
    for i in (1..k).rev() {
        levels.swap(i, rng.random_range(0..=i));
    }
    let hue0: f64 = rng.random();
    let mut planes = Vec::with_capacity(k);
    let mut colors = Vec::with_capacity(k);
    for (i, r) in rects.iter().enumerate() {
        let a = rng.random_range(-1.0..=1.0) * spec.max_slope;
        let b = rng.random_range(-1.0..=1.0) * spec.max_slope;
        let (cx, cy) = (r.x as f64 + r.w as f64 / 2.0, r.y as f64 + r.h as f64 / 2.0);
        let mut c = levels[i] - a * cx - b * cy;
        let corners = [(r.x, r.y), (r.x + r.w - 1, r.y), (r.x, r.y + r.h - 1), (r.x + r.w - 1, r.y + r.h - 1)];
        let lowest = corners
            .iter()
            .map(|&(x, y)| a * x as f64 + b * y as f64 + c)
            .fold(f64::INFINITY, f64::min);
        if lowest < 0.5 {
            c += 0.5 - lowest;
        }
        planes.push(Plane { a, b, c });
        let v = rng.random_range(0.45..0.9);
        let hue = hue0 + i as f64 * 0.618_033_988_75;
        colors.push(if spec.uniform_color { [128.0; 3] } else { hsv(hue, 0.65, v) });
    }

    let mut region_of = vec![0usize; w * h];
    for (i, r) in rects.iter().enumerate() {
        for y in r.y..r.y + r.h {
            for x in r.x..r.x + r.w {
                region_of[y * w + x] = i;
            }
        }
    }
    let background = |x: usize, y: usize| planes[region_of[y * w + x]].eval(x as f64, y as f64);

    let mut objects = spec.objects.clone();
    if let Some(ro) = spec.random_objects {
        for _ in 0..ro.count {
            for _attempt in 0..200 {
                let thick = rng.random_range(ro.min_width..=ro.max_width);
                let long = rng.random_range(ro.min_length..=ro.max_length);
                let (ow, oh) = if rng.random_bool(0.7) { (thick, long) } else { (long, thick) };
                if ow + 2 > w || oh + 2 > h {
                    continue;
                }
                let x = rng.random_range(1..=w - ow - 1);
                let y = rng.random_range(1..=h - oh - 1);
                let grown = ObjectSpec {
                    x: x - 1,
                    y: y - 1,
                    width: ow + 2,
                    height: oh + 2,
                    depth_m: 1.0,
                    camouflage: false,
                };
                if objects.iter().any(|o| grown.overlaps(o)) {
                    continue;
                }
                let mut nearest = f64::INFINITY;
                for yy in y..y + oh {
                    for xx in x..x + ow {
                        nearest = nearest.min(background(xx, yy));
                    }
                }
                let ratio = rng.random_range(ro.min_depth_ratio..=ro.max_depth_ratio);
                objects.push(ObjectSpec {
                    x,
                    y,
                    width: ow,
                    height: oh,
                    depth_m: nearest * ratio,
                    camouflage: ro.camouflage,
                });
                break;
            }
        }
    }

    let mut depth = vec![0.0; w * h];
    let mut rgb = vec![[0.0f64; 3]; w * h];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            depth[i] = background(x, y);
            rgb[i] = colors[region_of[i]];
        }
    }
    // surface id per pixel: regions first, then objects
    let mut surface: Vec<u32> = region_of.iter().map(|&r| r as u32).collect();
    let mut surface_planes = planes.clone();
    let mut obstacle = vec![false; w * h];
    for (k, o) in objects.iter().enumerate() {
        let under = colors[region_of[(o.y + o.height / 2) * w + o.x + o.width / 2]];
        let luma = 0.299 * under[0] + 0.587 * under[1] + 0.114 * under[2];
        let color = hsv(hue0 + 0.5 + 0.13 * k as f64, 0.9, if luma > 128.0 { 0.3 } else { 0.97 });
        let id = surface_planes.len() as u32;
        surface_planes.push(Plane::constant(o.depth_m));
        for y in o.y..o.y + o.height {
            for x in o.x..o.x + o.width {
                let i = y * w + x;
                depth[i] = o.depth_m;
                obstacle[i] = true;
                surface[i] = id;
                if !o.camouflage {
                    rgb[i] = color;
                }
            }
        }
    }

    if spec.noise_sigma > 0.0 {
        let normal = rand_distr::Normal::new(0.0, spec.noise_sigma).map_err(|e| Error::param(e.to_string()))?;
        for d in &mut depth {
            *d = (*d + rng.sample(normal)).max(0.01);
        }
    }
    let mut pixels = Vec::with_capacity(3 * w * h);
    for c in &rgb {
        for &ch in c {
            let t = if spec.texture > 0.0 {
                rng.random_range(-spec.texture..=spec.texture)
            } else {
                0.0
            };
            pixels.push((ch + t).round().clamp(0.0, 255.0) as u8);
        }
    }

    let regions = SegmentMap::connected_components(w, h, &surface)?;
    let mut region_planes = vec![Plane::constant(0.0); regions.num_segments()];
    for (i, &l) in regions.labels().iter().enumerate() {
        region_planes[l as usize] = surface_planes[surface[i] as usize];
    }
    Ok(SyntheticScene {
        rgb: RgbImage::new(w, h, pixels)?,
        depth: DepthMap::dense(w, h, depth)?,
        obstacle_mask: EvalMask::new(w, h, obstacle)?,
        regions,
        planes: region_planes,
        objects,
    })
}
