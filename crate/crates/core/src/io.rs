//! File formats.
//!
//! - RGB: any 8/16-bit PNG; gray and alpha channels are folded to RGB.
//! - Depth: 16-bit gray PNG in millimeters, 0 = invalid, plus a sidecar
//!   `<stem>.scale.txt` holding `meters_per_unit=0.001`.
//! - Labels: 16-bit gray PNG, one value per segment id.
//! - Masks: 8-bit gray PNG, nonzero = included.
//! - Samples: CSV `x,y,depth_m` (depth left empty for unexecuted patterns).

use std::fs;
use std::path::{Path, PathBuf};

use image::{ImageBuffer, Luma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::planar::PlanarModel;
use crate::sampler::SamplePattern;
use crate::types::{DepthMap, EvalMask, RgbImage, Sample, SampleSet, SamplerKind, SegmentMap};

pub const DEFAULT_METERS_PER_UNIT: f64 = 0.001;
/// Largest depth a 16-bit millimeter PNG can hold.
pub const MAX_PNG_DEPTH_M: f64 = 65.535;

fn open(path: &Path) -> Result<image::DynamicImage> {
    image::open(path).map_err(|source| match source {
        image::ImageError::IoError(e) => Error::io(path, e),
        source => Error::Image {
            path: path.display().to_string(),
            source,
        },
    })
}

fn save<P, C>(path: &Path, buf: &ImageBuffer<P, C>) -> Result<()>
where
    P: image::Pixel + image::PixelWithColorType,
    [P::Subpixel]: image::EncodableLayout,
    C: std::ops::Deref<Target = [P::Subpixel]>,
{
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    buf.save_with_format(path, image::ImageFormat::Png).map_err(|source| Error::Image {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_rgb(path: impl AsRef<Path>) -> Result<RgbImage> {
    let img = open(path.as_ref())?.to_rgb8();
    let (w, h) = img.dimensions();
    RgbImage::new(w as usize, h as usize, img.into_raw())
}

pub fn write_rgb(path: impl AsRef<Path>, image: &RgbImage) -> Result<()> {
    let buf: ImageBuffer<image::Rgb<u8>, _> =
        ImageBuffer::from_raw(image.width() as u32, image.height() as u32, image.pixels().to_vec())
            .ok_or_else(|| Error::InvalidData("RGB buffer size".into()))?;
    save(path.as_ref(), &buf)
}

/// Sidecar path for a depth PNG: `dir/name.png` -> `dir/name.scale.txt`.
pub fn scale_sidecar(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.scale.txt"))
}

fn read_scale(path: &Path) -> Result<f64> {
    let side = scale_sidecar(path);
    let Ok(text) = fs::read_to_string(&side) else {
        return Ok(DEFAULT_METERS_PER_UNIT);
    };
    for line in text.lines() {
        if let Some(v) = line.trim().strip_prefix("meters_per_unit=") {
            let s: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::InvalidData(format!("bad scale in {}", side.display())))?;
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::InvalidData(format!("bad scale in {}", side.display())));
            }
            return Ok(s);
        }
    }
    Ok(DEFAULT_METERS_PER_UNIT)
}

/// Reads a depth PNG; 0 marks invalid pixels.
pub fn read_depth(path: impl AsRef<Path>) -> Result<DepthMap> {
    let path = path.as_ref();
    let scale = read_scale(path)?;
    let img = open(path)?.to_luma16();
    let (w, h) = img.dimensions();
    let raw = img.into_raw();
    let valid: Vec<bool> = raw.iter().map(|&v| v != 0).collect();
    let depth = raw.iter().map(|&v| v as f64 * scale).collect();
    DepthMap::new(w as usize, h as usize, depth, valid)
}

/// Writes millimeters, clamping to `[1, 65535]` for valid pixels so that
/// validity survives the round trip.
pub fn write_depth(path: impl AsRef<Path>, d: &DepthMap) -> Result<()> {
    let path = path.as_ref();
    let raw: Vec<u16> = d
        .depth()
        .iter()
        .zip(d.valid())
        .map(|(&v, &ok)| if ok { (v / DEFAULT_METERS_PER_UNIT).round().clamp(1.0, 65535.0) as u16 } else { 0 })
        .collect();
    let buf: ImageBuffer<Luma<u16>, _> = ImageBuffer::from_raw(d.width() as u32, d.height() as u32, raw)
        .ok_or_else(|| Error::InvalidData("depth buffer size".into()))?;
    save(path, &buf)?;
    let side = scale_sidecar(path);
    fs::write(&side, format!("meters_per_unit={DEFAULT_METERS_PER_UNIT}\ninvalid=0\n")).map_err(|e| Error::io(&side, e))
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<SegmentMap> {
    let img = open(path.as_ref())?.to_luma16();
    let (w, h) = img.dimensions();
    let raw: Vec<u32> = img.into_raw().into_iter().map(u32::from).collect();
    SegmentMap::from_raw_labels(w as usize, h as usize, &raw)
}

pub fn write_labels(path: impl AsRef<Path>, segments: &SegmentMap) -> Result<()> {
    if segments.num_segments() > u16::MAX as usize + 1 {
        return Err(Error::InvalidData(format!(
            "{} segments do not fit a 16-bit label image",
            segments.num_segments()
        )));
    }
    let raw: Vec<u16> = segments.labels().iter().map(|&l| l as u16).collect();
    let buf: ImageBuffer<Luma<u16>, _> = ImageBuffer::from_raw(segments.width() as u32, segments.height() as u32, raw)
        .ok_or_else(|| Error::InvalidData("label buffer size".into()))?;
    save(path.as_ref(), &buf)
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<EvalMask> {
    let img = open(path.as_ref())?.to_luma8();
    let (w, h) = img.dimensions();
    EvalMask::new(w as usize, h as usize, img.into_raw().into_iter().map(|v| v != 0).collect())
}

pub fn write_mask(path: impl AsRef<Path>, width: usize, height: usize, include: &[bool]) -> Result<()> {
    let raw: Vec<u8> = include.iter().map(|&b| if b { 255 } else { 0 }).collect();
    let buf: ImageBuffer<Luma<u8>, _> = ImageBuffer::from_raw(width as u32, height as u32, raw)
        .ok_or_else(|| Error::InvalidData("mask buffer size".into()))?;
    save(path.as_ref(), &buf)
}

#[derive(Debug, Serialize, Deserialize)]
struct SampleRow {
    x: usize,
    y: usize,
    depth_m: Option<f64>,
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::WriterBuilder::new().has_headers(false).from_writer(f))
}

const SAMPLE_HEADER: [&str; 3] = ["x", "y", "depth_m"];

pub fn write_samples(path: impl AsRef<Path>, samples: &SampleSet) -> Result<()> {
    let mut wtr = csv_writer(path.as_ref())?;
    wtr.write_record(SAMPLE_HEADER)?;
    for s in samples.entries() {
        wtr.serialize(SampleRow {
            x: s.x,
            y: s.y,
            depth_m: Some(s.depth),
        })?;
    }
    wtr.flush().map_err(|e| Error::io(path.as_ref(), e))
}

pub fn write_pattern(path: impl AsRef<Path>, pattern: &SamplePattern) -> Result<()> {
    let mut wtr = csv_writer(path.as_ref())?;
    wtr.write_record(SAMPLE_HEADER)?;
    for &(x, y) in &pattern.coords {
        wtr.serialize(SampleRow { x, y, depth_m: None })?;
    }
    wtr.flush().map_err(|e| Error::io(path.as_ref(), e))
}

/// Reads executed samples for an image of the given size. Rows with an empty
/// depth are rejected.
pub fn read_samples(path: impl AsRef<Path>, width: usize, height: usize) -> Result<SampleSet> {
    let path = path.as_ref();
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(f);
    let mut entries = Vec::new();
    for row in rdr.deserialize() {
        let row: SampleRow = row?;
        let depth = row
            .depth_m
            .ok_or_else(|| Error::InvalidData(format!("sample ({}, {}) has no depth", row.x, row.y)))?;
        entries.push(Sample {
            x: row.x,
            y: row.y,
            depth,
        });
    }
    let n = entries.len();
    SampleSet::new(width, height, entries, SamplerKind::Imported, n)
}

/// Writes `regions.csv` (id,a,b,c,pixel_count), `labels.png`, `validity.png`
/// and `summary.json` into `dir`.
pub fn write_planar_model(dir: impl AsRef<Path>, model: &PlanarModel) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut counts = vec![0usize; model.planes.len()];
    for (&l, &v) in model.segments.labels().iter().zip(&model.validity) {
        if v {
            counts[l as usize] += 1;
        }
    }
    let mut wtr = csv_writer(&dir.join("regions.csv"))?;
    wtr.write_record(["id", "a", "b", "c", "pixel_count"])?;
    for (i, (p, n)) in model.planes.iter().zip(&counts).enumerate() {
        wtr.write_record([i.to_string(), p.a.to_string(), p.b.to_string(), p.c.to_string(), n.to_string()])?;
    }
    wtr.flush().map_err(|e| Error::io(dir, e))?;
    write_labels(dir.join("labels.png"), &model.segments)?;
    let (w, h) = model.segments.dims();
    write_mask(dir.join("validity.png"), w, h, &model.validity)?;
    let summary = serde_json::json!({
        "regions": model.stats.regions,
        "delta": model.stats.delta,
        "epsilon_m": model.stats.epsilon,
        "min_samples": model.min_samples(),
    });
    write_json(dir.join("summary.json"), &summary)
}

pub fn write_json(path: impl AsRef<Path>, value: &impl Serialize) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
