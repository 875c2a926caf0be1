//! Dataset manifests, splits, the synthetic dataset generator and the
//! experiment runner behind the command-line tool.

mod config;
mod manifest;
mod report;
mod run;
mod split;
mod synth;
mod tools;

pub use config::{default_grid, full_grid, AudioSettings, ExperimentConfig, RowSpec, RowModality, TextSettings};
pub use manifest::{load_manifest, write_manifest, Manifest, Record};
pub use report::{format_params, report_table, ReportRow};
pub use run::{run_experiment, Dataset, ExperimentOutcome, FitRecord, RowOutcome};
pub use split::{split, Split, SplitAssignment};
pub use synth::{synth_dataset, SynthSpec};
pub use tools::{documents, evaluate_predictions, label_infogain};

use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

use crate::audio::AudioError;
use crate::label_space::LabelError;
use crate::metrics::MetricsError;
use crate::nn::NnError;
use crate::text::TextError;
use crate::zoo::ZooError;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: duplicate id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: referenced file {} does not exist", path.display())]
    DanglingPath { line: usize, path: PathBuf },
    #[error("need at least {min} items, got {got}")]
    TooFewItems { min: usize, got: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid data: {0}")]
    Data(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Label(#[from] LabelError),
    #[error(transparent)]
    Text(#[from] TextError),
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Zoo(#[from] ZooError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<PipelineError>,
    },
}

/// Coarse failure class, mapped to process exit codes by the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numeric,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Config => 2,
            ErrorKind::Data => 3,
            ErrorKind::Numeric => 4,
        }
    }
}

impl fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ErrorKind::Config => "configuration error",
            ErrorKind::Data => "data error",
            ErrorKind::Numeric => "numeric failure",
        })
    }
}

impl PipelineError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            PipelineError::Config(_) => ErrorKind::Config,
            PipelineError::Zoo(ZooError::ConfigInvalid(_)) => ErrorKind::Config,
            PipelineError::Zoo(ZooError::NonFiniteLoss { .. })
            | PipelineError::Zoo(ZooError::Nn(NnError::NonFinite { .. }))
            | PipelineError::Nn(NnError::NonFinite { .. }) => ErrorKind::Numeric,
            PipelineError::Stage { source, .. } => source.kind(),
            _ => ErrorKind::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| PipelineError::Io { path, source }
    }
}

/// Attaches a stage name to errors.
pub(crate) trait InStage<T> {
    fn stage(self, stage: &str) -> Result<T, PipelineError>;
}

impl<T, E: Into<PipelineError>> InStage<T> for Result<T, E> {
    fn stage(self, stage: &str) -> Result<T, PipelineError> {
        self.map_err(|e| PipelineError::Stage {
            stage: stage.to_string(),
            source: Box::new(e.into()),
        })
    }
}
