//! Pipeline orchestration for the `radarloc` command.
//!
//! The full chain runs as four stages that communicate only through files in
//! the output directory, so `run` and a sequence of `stage` calls produce the
//! same artifacts.

pub mod config;
pub mod pipeline;
pub mod report;
pub mod scenario;
pub mod svg;

use std::fmt;

pub use config::PipelineConfig;
pub use pipeline::{run_pipeline, run_stage, Stage};
pub use report::LocalizationReport;

/// Exit status for bad input files, configs or missing intermediates.
pub const EXIT_INPUT: i32 = 2;
/// Exit status when a stage cannot produce a result from valid input.
pub const EXIT_STAGE: i32 = 3;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub stage: Option<Stage>,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            stage: None,
            message: message.into(),
        }
    }

    pub fn stage(stage: Stage, message: impl Into<String>) -> Self {
        Self {
            code: EXIT_STAGE,
            stage: Some(stage),
            message: message.into(),
        }
    }

    /// Sorts a library error into an input error or a failure of `stage`.
    pub fn from_core(stage: Stage, e: radarloc::Error) -> Self {
        use radarloc::Error::*;
        match e {
            Io { .. } | Parse { .. } | InvalidSpec(_) | InvalidParameter(_) => Self {
                code: EXIT_INPUT,
                stage: Some(stage),
                message: e.to_string(),
            },
            NoOverlap { .. } | DegenerateGeometry(_) | SingularMatrix(_) => Self::stage(stage, e.to_string()),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.code, self.stage) {
            (EXIT_STAGE, Some(s)) => write!(f, "stage {s} failed: {}", self.message),
            (_, Some(s)) => write!(f, "{s}: {}", self.message),
            _ => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for CliError {}
