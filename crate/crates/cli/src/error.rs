use lml_core::LmlError;

/// Failures mapped to process exit codes.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Parse(String),
    #[error("inadmissible input: {0}")]
    Inadmissible(String),
    #[error("the fit did not converge: {0}")]
    NotConverged(String),
    #[error("no model has a p-value of at least {alpha}")]
    NothingPasses { alpha: f64 },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Parse(_) | CliError::Io { .. } => 2,
            CliError::Inadmissible(_) => 3,
            CliError::NotConverged(_) => 4,
            CliError::NothingPasses { .. } => 5,
        }
    }

    pub fn parse(msg: impl Into<String>) -> Self {
        CliError::Parse(msg.into())
    }
}

impl From<LmlError> for CliError {
    fn from(e: LmlError) -> Self {
        match e {
            LmlError::Inadmissible { .. } | LmlError::NonFinite(_) | LmlError::InvalidCounts(_) => {
                CliError::Inadmissible(e.to_string())
            }
            LmlError::RankDeficient { .. } | LmlError::NotConverged => {
                CliError::NotConverged(e.to_string())
            }
            _ => CliError::Parse(e.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
