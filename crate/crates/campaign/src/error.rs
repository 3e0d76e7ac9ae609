use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl FieldError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error("campaign '{0}' not found")]
    NotFound(String),
    #[error("conflict: {0}")]
    Conflict(String),
    #[error("validation failed: {}", summarize(.0))]
    Validation(Vec<FieldError>),
    #[error("unsupported export format '{0}'")]
    UnsupportedFormat(String),
    #[error(transparent)]
    Engine(#[from] monobo::Error),
    #[error("corrupt event log {path}: {reason}")]
    CorruptLog { path: String, reason: String },
    #[error("storage: {0}")]
    Io(#[from] std::io::Error),
    #[error("config: {0}")]
    Config(String),
}

fn summarize(fields: &[FieldError]) -> String {
    fields
        .iter()
        .map(|f| format!("{}: {}", f.field, f.message))
        .collect::<Vec<_>>()
        .join("; ")
}

impl CampaignError {
    pub fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        CampaignError::Validation(vec![FieldError::new(field, message)])
    }

    /// Machine-readable tag used in HTTP error bodies.
    pub fn tag(&self) -> &'static str {
        match self {
            CampaignError::NotFound(_) => "not_found",
            CampaignError::Conflict(_) => "conflict",
            CampaignError::Validation(_) => "validation",
            CampaignError::UnsupportedFormat(_) => "unsupported_format",
            CampaignError::Engine(monobo::Error::Input(_)) => "invalid_input",
            CampaignError::Engine(monobo::Error::Config(_)) | CampaignError::Config(_) => "config",
            CampaignError::Engine(_) => "engine",
            CampaignError::CorruptLog { .. } => "corrupt_log",
            CampaignError::Io(_) => "storage",
        }
    }

    pub fn status(&self) -> u16 {
        match self {
            CampaignError::NotFound(_) => 404,
            CampaignError::Conflict(_) => 409,
            CampaignError::UnsupportedFormat(_) => 400,
            CampaignError::Validation(_)
            | CampaignError::Engine(monobo::Error::Input(_))
            | CampaignError::Engine(monobo::Error::Config(_)) => 422,
            _ => 500,
        }
    }
}

pub type Result<T> = std::result::Result<T, CampaignError>;
