//! Persistence: measurement datasets, configuration files and exporters.

pub mod config;
pub mod dataset;
pub mod export;
pub mod scene_config;

pub use dataset::{read_dataset, write_dataset, MeasurementSet};
pub use export::{export_ply, export_volume, read_volume, render_slice, CsvTable};
pub use scene_config::{
    aperture_from, chirp_from, load_aperture, load_chirp, load_weights, weights_from, ChirpFile, SceneConfig,
    SceneSource, TrainFile,
};
