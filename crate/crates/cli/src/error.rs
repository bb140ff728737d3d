use epr_core::ErrorKind;
use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] epr_core::Error),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Core(e) => match e.kind() {
                ErrorKind::InvalidInput => "config",
                ErrorKind::Domain => "domain",
                ErrorKind::Numerical => "numerical",
            },
            CliError::Io(_) => "io",
            _ => "config",
        }
    }

    /// 2 for bad configuration or input, 3 for physics domain errors, 4 for
    /// numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            "domain" => 3,
            "numerical" => 4,
            _ => 2,
        }
    }

    pub fn to_json(&self) -> String {
        json!({ "error": { "kind": self.kind(), "message": self.to_string() } }).to_string()
    }
}
