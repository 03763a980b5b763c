use dslt::DsltError;
use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid {field}: {message}")]
    Validation { field: String, message: String },

    #[error("config {field}: {message}")]
    Config { field: String, message: String },

    #[error(transparent)]
    Core(#[from] DsltError),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Core field names spelled as the matching command-line flag.
fn flag_name(field: &str) -> &str {
    match field {
        "epsilon" => "eps",
        "n_paths" => "n-paths",
        "n_steps" => "n-steps",
        "eps_ladder" => "eps-ladder",
        "rel_tol" => "rel-tol",
        other => other,
    }
}

impl CliError {
    pub fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Validation { field: field.into(), message: message.into() }
    }

    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config { field: field.into(), message: message.into() }
    }

    pub fn field(&self) -> Option<&str> {
        match self {
            CliError::Validation { field, .. } | CliError::Config { field, .. } => Some(field),
            CliError::Core(DsltError::Domain { field, .. }) => Some(flag_name(field)),
            _ => None,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Validation { .. } | CliError::Core(DsltError::Domain { .. }) => "validation",
            CliError::Config { .. } => "config",
            CliError::Core(DsltError::NonConvergence { .. }) => "non_convergence",
            CliError::Core(_) => "numerical",
            CliError::Io(_) => "io",
        }
    }

    /// 2 for bad input, 1 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            "validation" | "config" => 2,
            _ => 1,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "error": {
                "kind": self.kind(),
                "field": self.field(),
                "message": self.to_string(),
            },
            "version": env!("CARGO_PKG_VERSION"),
        })
    }
}
