use thiserror::Error;

/// Failures mapped onto process exit codes.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Instability(String),
    #[error("{0}")]
    FitFailure(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Instability(_) => 3,
            CliError::FitFailure(_) => 4,
            CliError::Other(_) => 1,
        }
    }
}

impl From<omsqueeze::Error> for CliError {
    fn from(e: omsqueeze::Error) -> Self {
        use omsqueeze::Error as E;
        let msg = e.to_string();
        match e {
            E::Config { .. } | E::InvalidParameter { .. } | E::ZeroPumpPower => CliError::Config(msg),
            ref x if x.is_instability() => CliError::Instability(msg),
            E::Fit(_) | E::InsufficientData(_) => CliError::FitFailure(msg),
            _ => CliError::Other(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Other(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
