//! Command-line harness: configuration, run manifests and the
//! warp / preprocess / inpaint / pipeline / metrics / ablate-band commands.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;

pub use commands::{
    cmd_ablate_band, cmd_inpaint, cmd_metrics, cmd_pipeline, cmd_preprocess, cmd_warp, write_fixture,
};
pub use config::{Overrides, PipelineConfig, Resolution};
pub use error::{CliError, CliResult};
pub use manifest::RunManifest;
