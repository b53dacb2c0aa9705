use std::path::Path;

use bspop_core::simharness::ScenarioError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn scenario(path: &Path, e: ScenarioError) -> Self {
        match e {
            ScenarioError::Io(source) => Self::io(path, source),
            other => Self::Config(format!("{}: {other}", path.display())),
        }
    }

    /// 2 for configuration problems, 3 for file-system problems.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Io { .. } => 3,
        }
    }
}
