//! Staged command-line pipeline: generate, filter, dynamics, qoi, invert,
//! metrics. Every stage reads its inputs from the output directory and
//! writes its artifacts back there.

pub mod config;
pub mod pipeline;

use std::path::PathBuf;

pub use config::PipelineConfig;
pub use pipeline::{run_all, run_stage, Stage};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("missing artifact {}: run the `{stage}` stage first", path.display())]
    MissingArtifact { path: PathBuf, stage: &'static str },

    #[error(transparent)]
    Core(#[from] dynqoi::Error),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl CliError {
    /// 2 config error, 3 numerical or runtime failure, 4 missing or
    /// unreadable artifact.
    pub fn exit_code(&self) -> i32 {
        use dynqoi::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::MissingArtifact { .. } => 4,
            CliError::Core(E::Format { .. } | E::Csv(_)) => 4,
            CliError::Core(E::UnknownExperiment(_)) => 2,
            CliError::Core(_) => 3,
        }
    }
}
