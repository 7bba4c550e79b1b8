use ctrlopt::PricingError;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),

    #[error("invalid configuration `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{0} comparison(s) outside tolerance")]
    Breach(usize),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Machine-readable form written to stderr.
#[derive(Serialize)]
struct ErrorRecord<'a> {
    error: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    field: Option<&'a str>,
    message: String,
}

impl CliError {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        CliError::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Engine error raised while checking config section `section`; core
    /// field names are rewritten to their paths in the config document.
    pub fn prefixed(section: &str, err: PricingError) -> Self {
        match err.field() {
            Some(f) => {
                let path = if let Some(rest) = f.strip_prefix("market.") {
                    format!("params.{rest}")
                } else if let Some(rest) = f.strip_prefix("payoff.") {
                    format!("spec.{rest}")
                } else if f.starts_with("bounds.") {
                    format!("spec.{f}")
                } else {
                    format!("{section}.{f}")
                };
                CliError::config(path, err.to_string())
            }
            None => CliError::from(err),
        }
    }

    pub fn field(&self) -> Option<&str> {
        match self {
            CliError::Config { field, .. } => Some(field),
            _ => None,
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Config { .. } => 2,
            CliError::Numerical(_) | CliError::Io(_) => 3,
            CliError::Breach(_) => 4,
        }
    }

    pub fn to_json(&self) -> String {
        let kind = match self {
            CliError::Usage(_) => "usage",
            CliError::Config { .. } => "configuration",
            CliError::Numerical(_) => "numerical",
            CliError::Breach(_) => "tolerance",
            CliError::Io(_) => "io",
        };
        let rec = ErrorRecord {
            error: kind,
            field: self.field(),
            message: self.to_string(),
        };
        serde_json::to_string(&rec).expect("error record serializes")
    }
}

impl From<PricingError> for CliError {
    fn from(err: PricingError) -> Self {
        match &err {
            PricingError::InvalidParameter { .. } | PricingError::Configuration { .. } => {
                let field = err.field().unwrap_or("config").to_string();
                CliError::config(field, err.to_string())
            }
            PricingError::Refused(_) => CliError::config("methods", err.to_string()),
            PricingError::NumericalFailure { .. }
            | PricingError::Extrapolation(_)
            | PricingError::Admissibility(_) => CliError::Numerical(err.to_string()),
        }
    }
}
