use hedger_core::HedgeError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("invalid input: {0}")]
    Invalid(HedgeError),
    #[error("numeric failure: {0}")]
    Numeric(HedgeError),
    #[error("output error: {0}")]
    Output(String),
}

impl From<HedgeError> for CliError {
    fn from(e: HedgeError) -> Self {
        match e {
            HedgeError::Numeric { .. } => CliError::Numeric(e),
            other => CliError::Invalid(other),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Invalid(_) => 2,
            CliError::Numeric(_) | CliError::Output(_) => 3,
        }
    }
}
