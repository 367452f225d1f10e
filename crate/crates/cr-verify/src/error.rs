use thiserror::Error;

/// Errors raised while loading or validating a scenario configuration.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
    #[error("invalid filter glob: {0}")]
    Filter(#[from] globset::Error),
}

impl ConfigError {
    pub(crate) fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError::Invalid {
            field: field.into(),
            message: message.into(),
        }
    }
}

/// Errors raised while running a check or writing a report.
#[derive(Debug, Error)]
pub enum RunError {
    #[error("scenario {scenario}, check {check}: {message}")]
    Numerical {
        scenario: String,
        check: String,
        message: String,
    },
    #[error("report serialization failed: {0}")]
    Report(String),
}
