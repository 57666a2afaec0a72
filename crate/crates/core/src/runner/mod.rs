//! Command layer: configuration, scenario presets and the gen / train / eval /
//! sort / sweep / bench commands.

mod commands;
mod config;
mod scenario;

pub use commands::{build_stream, execute, load_samples, Command, Outcome};
pub use config::{ClassifierKind, RunConfig};
pub use scenario::{ModelSpec, Scenario, ScenarioSpec, StreamModel};

use thiserror::Error;

use crate::cnn::CnnError;
use crate::imgproc::ImageError;
use crate::sorter::SorterError;
use crate::synth::SynthError;

/// Failures grouped by process exit code.
#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("usage error: {0}")]
    Usage(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("budget violation: {0}")]
    Budget(String),
}

impl RunnerError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunnerError::Usage(_) => 1,
            RunnerError::Data(_) => 2,
            RunnerError::Budget(_) => 3,
        }
    }
}

impl From<std::io::Error> for RunnerError {
    fn from(e: std::io::Error) -> Self {
        RunnerError::Data(e.to_string())
    }
}

impl From<SynthError> for RunnerError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::BadRequest(_) | SynthError::UnknownKind(_) => RunnerError::Usage(e.to_string()),
            _ => RunnerError::Data(e.to_string()),
        }
    }
}

impl From<CnnError> for RunnerError {
    fn from(e: CnnError) -> Self {
        match e {
            CnnError::Config(_) => RunnerError::Usage(e.to_string()),
            _ => RunnerError::Data(e.to_string()),
        }
    }
}

impl From<SorterError> for RunnerError {
    fn from(e: SorterError) -> Self {
        match e {
            SorterError::Config(_) => RunnerError::Usage(e.to_string()),
            _ => RunnerError::Data(e.to_string()),
        }
    }
}

impl From<ImageError> for RunnerError {
    fn from(e: ImageError) -> Self {
        match e {
            ImageError::BadPlan(_) => RunnerError::Usage(e.to_string()),
            _ => RunnerError::Data(e.to_string()),
        }
    }
}
