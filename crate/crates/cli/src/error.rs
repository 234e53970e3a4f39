use std::fmt;
use std::path::{Path, PathBuf};

use serde_json::json;

/// Pipeline stage at which a command failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Input,
    Quantiles,
    Solve,
    Output,
    Evaluate,
    Generate,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Config => "config",
            Stage::Input => "input",
            Stage::Quantiles => "quantiles",
            Stage::Solve => "solve",
            Stage::Output => "output",
            Stage::Evaluate => "evaluate",
            Stage::Generate => "generate",
        }
    }
}

/// A failure with enough context for a machine-readable error record.
#[derive(Debug, Clone)]
pub struct CliError {
    pub stage: Stage,
    pub message: String,
    pub path: Option<PathBuf>,
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn new(stage: Stage, message: impl fmt::Display) -> Self {
        CliError {
            stage,
            message: message.to_string(),
            path: None,
        }
    }

    pub fn at(stage: Stage, path: &Path, message: impl fmt::Display) -> Self {
        CliError {
            stage,
            message: message.to_string(),
            path: Some(path.to_path_buf()),
        }
    }

    /// One-line JSON record `{"error": {"stage", "message", "path"}}`.
    pub fn to_json(&self) -> String {
        json!({
            "error": {
                "stage": self.stage.name(),
                "message": self.message,
                "path": self.path.as_ref().map(|p| p.display().to_string()),
            }
        })
        .to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.path {
            Some(p) => write!(
                f,
                "{} error at {}: {}",
                self.stage.name(),
                p.display(),
                self.message
            ),
            None => write!(f, "{} error: {}", self.stage.name(), self.message),
        }
    }
}

impl std::error::Error for CliError {}

/// Attaches a stage (and optionally a path) to foreign errors.
pub trait Context<T> {
    fn stage(self, stage: Stage) -> CliResult<T>;
    fn at(self, stage: Stage, path: &Path) -> CliResult<T>;
}

impl<T, E: fmt::Display> Context<T> for Result<T, E> {
    fn stage(self, stage: Stage) -> CliResult<T> {
        self.map_err(|e| CliError::new(stage, e))
    }

    fn at(self, stage: Stage, path: &Path) -> CliResult<T> {
        self.map_err(|e| CliError::at(stage, path, e))
    }
}
