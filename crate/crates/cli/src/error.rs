use hhl_core::hhl::HhlError;
use hhl_core::nmr::NmrError;
use hhl_core::qcore::QcoreError;
use hhl_core::tomography::TomographyError;
use serde_json::json;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    ConfigParse(String),
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Solver(#[from] HhlError),
    #[error(transparent)]
    Nmr(#[from] NmrError),
    #[error(transparent)]
    Numeric(#[from] QcoreError),
    #[error(transparent)]
    Tomography(#[from] TomographyError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "UsageError",
            CliError::ConfigParse(_) => "ConfigParseError",
            CliError::Config(_) => "ConfigError",
            CliError::Solver(_) => "SolverError",
            CliError::Nmr(_) => "NmrError",
            CliError::Numeric(_) => "NumericError",
            CliError::Tomography(_) => "TomographyError",
            CliError::Io { .. } => "IoError",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::ConfigParse(_) | CliError::Config(_) => 2,
            _ => 1,
        }
    }

    pub fn to_json(&self) -> String {
        json!({ "error": { "kind": self.kind(), "message": self.to_string() } }).to_string()
    }
}
