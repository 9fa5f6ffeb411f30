//! End-to-end pipeline: parse, build, rewrite, search, schedule and emit.

mod commands;
mod manifest;
mod presets;

pub use commands::{
    cmd_approx_report, cmd_compile, cmd_emit, cmd_schedule, cmd_search, parse_format, ApproxReportOptions,
    CompileOptions, ScheduleOptions, SearchMode, SearchOptions, SearchOutcome,
};
pub use manifest::{CompilationManifest, KindSchedule, SearchSummary, TemplateParams, MANIFEST_VERSION};
pub use presets::{hardware_preset, model_preset, resolve_hardware_doc, resolve_model_doc, HARDWARE_PRESETS, MODEL_PRESETS};

use std::fmt;

use thiserror::Error;

/// Pipeline stage an error came from; each maps to its own exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    Usage,
    Input,
    Build,
    Rewrite,
    Search,
    Schedule,
    Approx,
    Emit,
    Io,
}

impl Stage {
    pub fn exit_code(self) -> i32 {
        match self {
            Stage::Usage => 2,
            Stage::Input => 3,
            Stage::Build => 4,
            Stage::Rewrite => 5,
            Stage::Search => 6,
            Stage::Schedule => 7,
            Stage::Approx => 8,
            Stage::Emit => 9,
            Stage::Io => 10,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Stage::Usage => "usage",
            Stage::Input => "input",
            Stage::Build => "build",
            Stage::Rewrite => "rewrite",
            Stage::Search => "search",
            Stage::Schedule => "schedule",
            Stage::Approx => "approx",
            Stage::Emit => "emit",
            Stage::Io => "io",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error)]
#[error("[{stage}] {message}")]
pub struct DriverError {
    pub stage: Stage,
    pub message: String,
}

impl DriverError {
    pub fn new(stage: Stage, message: impl fmt::Display) -> Self {
        Self { stage, message: message.to_string() }
    }

    pub fn exit_code(&self) -> i32 {
        self.stage.exit_code()
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: Stage) -> Result<T, DriverError>;
}

impl<T, E: fmt::Display> StageExt<T> for Result<T, E> {
    fn stage(self, stage: Stage) -> Result<T, DriverError> {
        self.map_err(|e| DriverError::new(stage, e))
    }
}
