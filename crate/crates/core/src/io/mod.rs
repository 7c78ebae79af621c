//! Configuration parsing, run artifacts, and plot-data export.

mod artifact;
mod config;
mod export;

pub use artifact::{
    load_artifact, save_artifact, ArtifactError, GridMeta, ModelEcho, PolicyRow, ResidualRow, RunArtifact, SolveMeta,
    ValueRow, ARTIFACT_FORMAT, ARTIFACT_VERSION,
};
pub use config::{
    parse_model_config, AtomParams, ConfigError, LogParams, MomentParams, RateParams, RunConfig, ShockConfig, DEFAULT_H,
};
pub use export::{export_plot_data, PlotData};
