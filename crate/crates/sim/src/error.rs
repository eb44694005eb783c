use std::path::PathBuf;

use misalign_core::ValidationIssue;

/// Anything that can go wrong between a scenario file and a finished run.
#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("failed to read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to parse {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: Box<toml::de::Error>,
    },
    #[error("{field}: {message}")]
    Schema { field: String, message: String },
    #[error("scenario failed validation ({} issues)", issues.len())]
    Invalid { issues: Vec<ValidationIssue> },
    #[error("{0}")]
    Sweep(String),
}

impl SimError {
    pub fn schema(field: impl Into<String>, message: impl Into<String>) -> Self {
        SimError::Schema { field: field.into(), message: message.into() }
    }

    /// True when the failure is a property of the scenario itself rather
    /// than of the environment; the CLI maps these to exit code 2.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            SimError::Parse { .. } | SimError::Schema { .. } | SimError::Invalid { .. } | SimError::Sweep(_)
        )
    }
}
