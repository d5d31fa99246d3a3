use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::synthetic::{ScenePreset, SceneSpec};
use crate::edgestats::EdgeParams;
use crate::error::{Error, Result};
use crate::planar::PlanarFitParams;
use crate::reconstruct::{BilateralParams, SceneType};
use crate::superpixel::SlicParams;
use crate::types::SamplerKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReconstructorKind {
    /// Zero-order fill plus log-domain bilateral filtering.
    Ours,
    /// Zero-order fill alone.
    ZeroOrder,
    /// Delaunay-linear interpolation.
    Bilinear,
    /// One plane per superpixel from three samples; brings its own pattern.
    FirstOrder,
}

impl ReconstructorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ReconstructorKind::Ours => "ours",
            ReconstructorKind::ZeroOrder => "zero-order",
            ReconstructorKind::Bilinear => "bilinear",
            ReconstructorKind::FirstOrder => "first-order",
        }
    }

    /// Whether the pair is meaningful. The planar baseline places its own
    /// samples inside superpixels, so it is only paired with `com`.
    pub fn supports(self, sampler: SamplerKind) -> bool {
        match self {
            ReconstructorKind::FirstOrder => sampler == SamplerKind::Com,
            _ => matches!(sampler, SamplerKind::Com | SamplerKind::Grid | SamplerKind::Random),
        }
    }
}

impl fmt::Display for ReconstructorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ReconstructorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "ours" => ReconstructorKind::Ours,
            "zero-order" => ReconstructorKind::ZeroOrder,
            "bilinear" => ReconstructorKind::Bilinear,
            "first-order" => ReconstructorKind::FirstOrder,
            other => return Err(Error::param(format!("unknown reconstructor '{other}'"))),
        })
    }
}

/// Filter knobs that may differ between scene types.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterOverrides {
    pub spatial_sigma: Option<f64>,
    pub range_sigma: Option<f64>,
    pub window_radius: Option<usize>,
}

impl FilterOverrides {
    pub fn apply(&self, mut p: BilateralParams) -> BilateralParams {
        if let Some(s) = self.spatial_sigma {
            p = BilateralParams::new(s, p.range_sigma);
        }
        if let Some(r) = self.range_sigma {
            p.range_sigma = r;
        }
        if let Some(r) = self.window_radius {
            p.window_radius = r;
        }
        p
    }
}

/// Scene generated in memory instead of read from disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticEntry {
    pub id: String,
    #[serde(default)]
    pub seed: u64,
    /// Starting point; fields of `spec` are used instead when given.
    pub preset: Option<ScenePreset>,
    pub spec: Option<SceneSpec>,
}

impl SyntheticEntry {
    pub fn scene_spec(&self) -> SceneSpec {
        match (&self.spec, self.preset) {
            (Some(s), _) => s.clone(),
            (None, Some(p)) => SceneSpec::preset(p),
            (None, None) => SceneSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepReference {
    pub sampler: SamplerKind,
    pub reconstructor: ReconstructorKind,
    pub budget: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepCompetitor {
    pub sampler: SamplerKind,
    pub reconstructor: ReconstructorKind,
}

/// Samples needed by each competitor to match the reference's error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub reference: SweepReference,
    pub competitors: Vec<SweepCompetitor>,
    /// Measure error on the obstacle mask when the image has one.
    #[serde(default = "yes")]
    pub use_mask: bool,
    /// Search ceiling; defaults to the pixel count.
    pub max_samples: Option<usize>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Directory of `<id>_rgb.png`, `<id>_depth.png` and optional
    /// `<id>_mask.png`, relative to the config file.
    pub dataset: Option<PathBuf>,
    #[serde(default)]
    pub synthetic: Vec<SyntheticEntry>,
    pub budgets: Vec<usize>,
    pub samplers: Vec<SamplerKind>,
    pub reconstructors: Vec<ReconstructorKind>,
    /// Pixels with ground truth beyond this are not evaluated (meters).
    pub range_cap: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub scene: SceneType,
    #[serde(default)]
    pub slic: SlicParams,
    /// Keyed by scene type (`indoor`, `outdoor`).
    #[serde(default)]
    pub overrides: BTreeMap<SceneType, FilterOverrides>,
    pub sweep: Option<SweepConfig>,
    /// Also compute planar-model and edge statistics per image.
    #[serde(default)]
    pub statistics: bool,
    #[serde(default)]
    pub planar: PlanarFitParams,
    #[serde(default)]
    pub edges: EdgeParams,
    #[serde(default = "default_rel_threshold")]
    pub depth_rel_threshold: f64,
    #[serde(default = "default_tol")]
    pub edge_tol_px: usize,
    /// Worker threads for the image pool; 0 uses every core.
    #[serde(default)]
    pub workers: usize,
}

fn default_rel_threshold() -> f64 {
    0.05
}

fn default_tol() -> usize {
    2
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses a config file; a relative `dataset` is resolved against the
    /// file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let (Some(d), Some(base)) = (&cfg.dataset, path.parent()) {
            if d.is_relative() {
                cfg.dataset = Some(base.join(d));
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.budgets.is_empty() || self.budgets.contains(&0) {
            return Err(Error::Config("budgets must be a non-empty list of values >= 1".into()));
        }
        if self.samplers.is_empty() || self.reconstructors.is_empty() {
            return Err(Error::Config("samplers and reconstructors must be non-empty".into()));
        }
        if let Some(s) = self
            .samplers
            .iter()
            .find(|s| !matches!(s, SamplerKind::Com | SamplerKind::Grid | SamplerKind::Random))
        {
            return Err(Error::Config(format!("sampler '{s}' cannot be used in a matrix")));
        }
        if let Some(c) = self.range_cap {
            if !(c > 0.0) {
                return Err(Error::Config("range_cap must be > 0".into()));
            }
        }
        if self.dataset.is_none() && self.synthetic.is_empty() {
            return Err(Error::Config("set `dataset` or add [[synthetic]] scenes".into()));
        }
        let mut ids = std::collections::BTreeSet::new();
        for s in &self.synthetic {
            if !ids.insert(&s.id) {
                return Err(Error::Config(format!("duplicate synthetic id '{}'", s.id)));
            }
            s.scene_spec().validate()?;
        }
        if let Some(sw) = &self.sweep {
            if sw.reference.budget == 0 || !sw.reference.reconstructor.supports(sw.reference.sampler) {
                return Err(Error::Config("sweep reference is not a valid pair".into()));
            }
            if let Some(c) = sw.competitors.iter().find(|c| !c.reconstructor.supports(c.sampler)) {
                return Err(Error::Config(format!("sweep competitor {}+{} is not a valid pair", c.sampler, c.reconstructor)));
            }
        }
        self.slic.validate()?;
        self.planar.validate()?;
        Ok(())
    }

    pub fn range_cap_value(&self) -> f64 {
        self.range_cap.unwrap_or(f64::INFINITY)
    }

    /// Filter parameters for a budget, after scene-type overrides.
    pub fn bilateral_for(&self, pixels: usize, n: usize) -> BilateralParams {
        let base = BilateralParams::for_budget(pixels, n, self.scene);
        match self.overrides.get(&self.scene) {
            Some(o) => o.apply(base),
            None => base,
        }
    }
}
