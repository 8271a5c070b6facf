//! Experiment presets, sweep drivers, result files and plots.

mod analysis;
mod config;
mod output;
mod plot;
mod sweep;

use thiserror::Error;

pub use analysis::{dominance_fraction, linear_fit, pearson, LinearFit};
pub use config::{
    preset, BaselineRule, ExperimentConfig, InstanceCell, InstanceSource, OutputKind,
    PresetOverrides, Setting, DEFAULT_ETA_GRID_POINTS,
};
pub use output::{config_hash, format_float, write_atomic};
pub use plot::{emit_plot, PlotKind};
pub use sweep::{
    resolve_policy, run_outputs, run_sweep, summary_csv, trajectory_csv, SweepOutput,
    MANIFEST_FILE, SCHEMA_VERSION,
};

use crate::engine::EngineError;
use crate::ingest::IngestError;
use crate::model::ModelError;
use crate::policies::PolicyError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("unknown setting {0:?}; expected one of 1, 2a, 2b, 3, 4a, 4b, 5")]
    UnknownSetting(String),
    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),
    #[error("csv does not match the {kind} schema: {reason}")]
    SchemaMismatch { kind: String, reason: String },
    #[error("unknown plot kind {0:?}")]
    UnknownPlotKind(String),
    #[error("plot rendering failed: {0}")]
    Plot(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

impl HarnessError {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
