//! Image-guided adaptive depth sampling and dense depth reconstruction.
//!
//! The pipeline over-segments the RGB image into superpixels, measures depth
//! once at each superpixel's center of mass, paints every superpixel with its
//! sample, and removes the staircase with a bilateral filter applied to
//! `log(d + 1)`. Around it:
//!
//! - [`sampler`]: center-of-mass, grid and random patterns, executed against a
//!   dense ground truth.
//! - [`reconstruct`]: the pipeline above plus Delaunay-linear and
//!   per-superpixel planar baselines.
//! - [`planar`]: piece-wise planar fits of depth maps and their statistics.
//! - [`edgestats`]: agreement between RGB edges and depth discontinuities.
//! - [`mtf`]: sector-star test chart and resolution curves.
//! - [`harness`]: synthetic scenes, dataset ingestion and sampler x
//!   reconstructor evaluation matrices.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod edgestats;
pub mod error;
pub mod harness;
pub mod io;
pub mod manifest;
pub mod metrics;
pub mod mtf;
pub mod planar;
pub mod reconstruct;
pub mod sampler;
pub mod superpixel;
pub mod types;

pub use error::{Error, Result};
pub use types::{DepthMap, EvalMask, RgbImage, Sample, SampleSet, SamplerKind, SegmentMap};
