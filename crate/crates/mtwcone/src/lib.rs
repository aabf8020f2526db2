//! Experiment runner for `mtwcone-core`: JSON configuration, the verification
//! pipeline, CSV tables and SVG plots.

pub mod config;
pub mod experiment;
pub mod plot;
pub mod table;

pub use config::{validate_config, validate_map, ConfigError, Experiment, ExperimentConfig, SurfaceKind};
pub use experiment::{build_surface, run_experiment, Report, ReportBundle, Stage, Status};
pub use mtwcone_core as core;
pub use plot::{render_plot, PlotError, PlotSpec};
pub use table::CsvTable;
