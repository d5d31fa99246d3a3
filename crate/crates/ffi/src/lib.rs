//! C ABI over `sparsedepth`.
//!
//! Every object is an opaque handle created by an `sd_*_new`-style call and
//! released with the matching `sd_*_free`. Fallible calls return an
//! [`SdStatus`] and write their result through an out-pointer; on failure a
//! description is available from [`sd_last_error_message`] on the same
//! thread until the next failing call.
//!
//! Buffers are row-major, `width * height` entries; RGB is interleaved
//! (3 bytes per pixel). Depth is in meters.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use sparsedepth::metrics::{rmse, NO_CAP};
use sparsedepth::reconstruct::{bilinear_baseline, reconstruct_ours, GroundTruthSensor, OursParams, SceneType};
use sparsedepth::sampler::{com_pattern, execute, grid_pattern, random_pattern, SamplePattern};
use sparsedepth::superpixel::{slic_segment, SlicParams};
use sparsedepth::{DepthMap, Error, EvalMask, RgbImage, SampleSet, SegmentMap};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    InvalidData = 3,
    DimensionMismatch = 4,
    EmptySet = 5,
    BufferTooSmall = 6,
    Io = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdScene {
    Outdoor = 0,
    Indoor = 1,
}

/// RGB image, 8 bits per channel.
pub struct SdImage(RgbImage);

/// Depth map with a validity flag per pixel.
pub struct SdDepth(DepthMap);

/// Superpixel partition.
pub struct SdSegments(SegmentMap);

/// Pixel positions to measure.
pub struct SdPattern(SamplePattern);

/// Measured samples.
pub struct SdSamples(SampleSet);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(SdStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::InvalidParameter(_) | Error::BudgetExceedsPixels { .. } | Error::RadiusOutOfRange { .. } => {
                SdStatus::InvalidParameter
            }
            Error::DimensionMismatch { .. } => SdStatus::DimensionMismatch,
            Error::EmptyEvaluationSet | Error::EmptyConditioningSet(_) | Error::EmptyDataset(_) => SdStatus::EmptySet,
            Error::Io { .. } | Error::Image { .. } | Error::Csv(_) | Error::Json(_) | Error::Config(_) => SdStatus::Io,
            _ => SdStatus::InvalidData,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(SdStatus::NullPointer, format!("{what} is NULL"))
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SdStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "internal panic".into());
            set_error(format!("internal error: {msg}"));
            SdStatus::Panic
        }
    }
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

fn pixels(width: usize, height: usize) -> Result<usize, Failure> {
    width
        .checked_mul(height)
        .ok_or_else(|| Failure(SdStatus::InvalidParameter, "width * height overflows".into()))
}

fn check_len(have: usize, need: usize) -> Result<(), Failure> {
    if have < need {
        return Err(Failure(SdStatus::BufferTooSmall, format!("buffer holds {have} entries, {need} required")));
    }
    Ok(())
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failing call on this thread, or NULL. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sd_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Copies `width * height * 3` bytes of interleaved RGB.
///
/// # Safety
/// `rgb` must point to `width * height * 3` readable bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sd_image_new(width: usize, height: usize, rgb: *const u8, out: *mut *mut SdImage) -> SdStatus {
    guard(|| {
        let n = pixels(width, height)?;
        let n = pixels(n, 3)?;
        let data = slice(rgb, n, "rgb")?.to_vec();
        put(out, SdImage(RgbImage::new(width, height, data)?))
    })
}

/// # Safety
/// `image` must be NULL or a handle from [`sd_image_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sd_image_free(image: *mut SdImage) {
    free(image)
}

/// Copies `width * height` depths. `valid` may be NULL (every pixel valid);
/// otherwise nonzero bytes mark valid pixels.
///
/// # Safety
/// Buffers must hold `width * height` entries; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sd_depth_new(
    width: usize,
    height: usize,
    depth: *const f64,
    valid: *const u8,
    out: *mut *mut SdDepth,
) -> SdStatus {
    guard(|| {
        let n = pixels(width, height)?;
        let d = slice(depth, n, "depth")?.to_vec();
        let v = if valid.is_null() {
            vec![true; n]
        } else {
            slice(valid, n, "valid")?.iter().map(|&b| b != 0).collect()
        };
        put(out, SdDepth(DepthMap::new(width, height, d, v)?))
    })
}

/// # Safety
/// `depth` must be NULL or a live depth handle.
#[no_mangle]
pub unsafe extern "C" fn sd_depth_free(depth: *mut SdDepth) {
    free(depth)
}

/// Writes width and height; either pointer may be NULL.
///
/// # Safety
/// `depth` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sd_depth_dims(depth: *const SdDepth, width: *mut usize, height: *mut usize) -> SdStatus {
    guard(|| {
        let d = handle(depth, "depth")?;
        if !width.is_null() {
            *width = d.0.width();
        }
        if !height.is_null() {
            *height = d.0.height();
        }
        Ok(())
    })
}

/// Copies the depths (and validity flags when `valid` is not NULL) into
/// caller buffers of `len` entries.
///
/// # Safety
/// `depth_out` (and `valid` if given) must hold `len` writable entries.
#[no_mangle]
pub unsafe extern "C" fn sd_depth_copy(depth: *const SdDepth, depth_out: *mut f64, valid: *mut u8, len: usize) -> SdStatus {
    guard(|| {
        let d = &handle(depth, "depth")?.0;
        check_len(len, d.len())?;
        slice_mut(depth_out, d.len(), "depth_out")?.copy_from_slice(d.depth());
        if !valid.is_null() {
            for (o, &v) in slice_mut(valid, d.len(), "valid")?.iter_mut().zip(d.valid()) {
                *o = v as u8;
            }
        }
        Ok(())
    })
}

/// Over-segments `image` into about `n` superpixels. `compactness <= 0`
/// selects the default.
///
/// # Safety
/// `image` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sd_slic(image: *const SdImage, n: usize, compactness: f64, out: *mut *mut SdSegments) -> SdStatus {
    guard(|| {
        let img = handle(image, "image")?;
        let mut p = SlicParams::with_segments(n);
        if compactness > 0.0 {
            p.compactness = compactness;
        }
        put(out, SdSegments(slic_segment(&img.0, &p)?))
    })
}

/// Builds a partition from raw labels; equal labels in disconnected areas
/// become separate segments.
///
/// # Safety
/// `labels` must hold `width * height` entries; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sd_segments_new(width: usize, height: usize, labels: *const u32, out: *mut *mut SdSegments) -> SdStatus {
    guard(|| {
        let raw = slice(labels, pixels(width, height)?, "labels")?;
        put(out, SdSegments(SegmentMap::connected_components(width, height, raw)?))
    })
}

/// Number of segments; 0 for NULL.
///
/// # Safety
/// `segments` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sd_segments_count(segments: *const SdSegments) -> usize {
    segments.as_ref().map_or(0, |s| s.0.num_segments())
}

/// Copies labels `0..count` into a buffer of `len` entries.
///
/// # Safety
/// `labels` must hold `len` writable entries.
#[no_mangle]
pub unsafe extern "C" fn sd_segments_copy_labels(segments: *const SdSegments, labels: *mut u32, len: usize) -> SdStatus {
    guard(|| {
        let s = &handle(segments, "segments")?.0;
        check_len(len, s.labels().len())?;
        slice_mut(labels, s.labels().len(), "labels")?.copy_from_slice(s.labels());
        Ok(())
    })
}

/// # Safety
/// `segments` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sd_segments_free(segments: *mut SdSegments) {
    free(segments)
}

/// One position per segment, at its center of mass.
///
/// # Safety
/// `segments` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sd_pattern_com(segments: *const SdSegments, out: *mut *mut SdPattern) -> SdStatus {
    guard(|| {
        let s = handle(segments, "segments")?;
        put(out, SdPattern(com_pattern(&s.0)))
    })
}

/// Regular lattice of about `n` positions.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sd_pattern_grid(width: usize, height: usize, n: usize, out: *mut *mut SdPattern) -> SdStatus {
    guard(|| put(out, SdPattern(grid_pattern(width, height, n)?)))
}

/// `n` distinct uniformly random positions, reproducible from `seed`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sd_pattern_random(
    width: usize,
    height: usize,
    n: usize,
    seed: u64,
    out: *mut *mut SdPattern,
) -> SdStatus {
    guard(|| put(out, SdPattern(random_pattern(width, height, n, seed)?)))
}

/// Number of positions; 0 for NULL.
///
/// # Safety
/// `pattern` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sd_pattern_len(pattern: *const SdPattern) -> usize {
    pattern.as_ref().map_or(0, |p| p.0.len())
}

/// Copies positions into `xs` and `ys`, each `len` entries.
///
/// # Safety
/// `xs` and `ys` must hold `len` writable entries.
#[no_mangle]
pub unsafe extern "C" fn sd_pattern_copy(pattern: *const SdPattern, xs: *mut usize, ys: *mut usize, len: usize) -> SdStatus {
    guard(|| {
        let p = &handle(pattern, "pattern")?.0;
        check_len(len, p.len())?;
        let xs = slice_mut(xs, p.len(), "xs")?;
        let ys = slice_mut(ys, p.len(), "ys")?;
        for (i, &(x, y)) in p.coords.iter().enumerate() {
            xs[i] = x;
            ys[i] = y;
        }
        Ok(())
    })
}

/// # Safety
/// `pattern` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sd_pattern_free(pattern: *mut SdPattern) {
    free(pattern)
}

/// Reads `gt` at every position. `segments` may be NULL; when given, reads
/// on invalid pixels move to a valid pixel of the same segment.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sd_execute(
    pattern: *const SdPattern,
    gt: *const SdDepth,
    segments: *const SdSegments,
    out: *mut *mut SdSamples,
) -> SdStatus {
    guard(|| {
        let p = handle(pattern, "pattern")?;
        let d = handle(gt, "gt")?;
        let s = segments.as_ref().map(|s| &s.0);
        put(out, SdSamples(execute(&p.0, &d.0, s, None)?))
    })
}

/// Number of samples; 0 for NULL.
///
/// # Safety
/// `samples` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sd_samples_len(samples: *const SdSamples) -> usize {
    samples.as_ref().map_or(0, |s| s.0.len())
}

/// Sample `index`; output pointers may be NULL.
///
/// # Safety
/// `samples` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sd_samples_get(
    samples: *const SdSamples,
    index: usize,
    x: *mut usize,
    y: *mut usize,
    depth: *mut f64,
) -> SdStatus {
    guard(|| {
        let s = &handle(samples, "samples")?.0;
        let e = s.entries().get(index).ok_or_else(|| {
            Failure(SdStatus::InvalidParameter, format!("index {index} out of range ({} samples)", s.len()))
        })?;
        if !x.is_null() {
            *x = e.x;
        }
        if !y.is_null() {
            *y = e.y;
        }
        if !depth.is_null() {
            *depth = e.depth;
        }
        Ok(())
    })
}

/// # Safety
/// `samples` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sd_samples_free(samples: *mut SdSamples) {
    free(samples)
}

/// Full adaptive pipeline: about `n` superpixels of `image`, one read of
/// `gt` per superpixel, zero-order fill and log-domain bilateral smoothing.
/// `samples_out` may be NULL.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sd_reconstruct_ours(
    image: *const SdImage,
    gt: *const SdDepth,
    n: usize,
    scene: SdScene,
    out: *mut *mut SdDepth,
    samples_out: *mut *mut SdSamples,
) -> SdStatus {
    guard(|| {
        let img = handle(image, "image")?;
        let d = handle(gt, "gt")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let params = OursParams {
            scene: match scene {
                SdScene::Outdoor => SceneType::Outdoor,
                SdScene::Indoor => SceneType::Indoor,
            },
            ..OursParams::default()
        };
        let r = reconstruct_ours(&img.0, &mut GroundTruthSensor::new(&d.0), n, &params)?;
        if !samples_out.is_null() {
            put(samples_out, SdSamples(r.samples))?;
        }
        put(out, SdDepth(r.depth))
    })
}

/// Piecewise-linear interpolation over the Delaunay triangulation of the
/// samples; outside the hull takes the nearest sample.
///
/// # Safety
/// `samples` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sd_reconstruct_bilinear(samples: *const SdSamples, out: *mut *mut SdDepth) -> SdStatus {
    guard(|| {
        let s = &handle(samples, "samples")?.0;
        put(out, SdDepth(bilinear_baseline(s, s.width(), s.height())?))
    })
}

/// Root-mean-square error over the valid pixels of `gt`, in meters. `pred`
/// must be valid wherever `gt` is.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sd_rmse(gt: *const SdDepth, pred: *const SdDepth, out: *mut f64) -> SdStatus {
    guard(|| {
        let g = &handle(gt, "gt")?.0;
        let p = &handle(pred, "pred")?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = rmse(g, p, &EvalMask::full(g.width(), g.height()), NO_CAP)?;
        Ok(())
    })
}
