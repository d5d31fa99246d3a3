//! Experiment orchestration: synthetic scenes, dataset ingestion, sampler x
//! reconstructor evaluation matrices, sample-economy sweeps and dataset
//! statistics.

mod config;
mod run;
mod stats;
mod synthetic;

pub use config::{
    ExperimentConfig, FilterOverrides, ReconstructorKind, SweepCompetitor, SweepConfig, SweepReference, SyntheticEntry,
};
pub use run::{
    dataset_items, derive_seed, run_matrix, run_method, samples_for_target, scan_dataset, superpixels, Aggregate,
    DatasetItem, ErrorEntry, EvalReport, EvalRow, Evaluation, ImageData, MethodParams, SweepRow,
};
pub use stats::{
    histogram, image_statistics, optimal_scenario, DatasetStatistics, HistogramBin, ImageStatistics, OptimalScenario,
};
pub use synthetic::{generate_synthetic_scene, ObjectSpec, RandomObjects, ScenePreset, SceneSpec, SyntheticScene};

/// Config of the five-scene synthetic set shipped with the crate.
pub const BUNDLED_CONFIG: &str = include_str!("../../data/bundled.toml");

/// The bundled synthetic scenes, in config order.
pub fn bundled_scenes() -> crate::Result<Vec<(String, SyntheticScene)>> {
    let cfg = ExperimentConfig::from_toml_str(BUNDLED_CONFIG)?;
    cfg.synthetic
        .iter()
        .map(|e| Ok((e.id.clone(), generate_synthetic_scene(&e.scene_spec(), e.seed)?)))
        .collect()
}
