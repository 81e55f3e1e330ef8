use boolperc::estimators::EstimatorError;
use boolperc::exploration::ExplorationError;
use boolperc::sampling::SamplingError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Truncation(String),
    #[error("{0}")]
    Bracket(String),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Truncation(_) => 3,
            CliError::Bracket(_) => 4,
            CliError::SchemaMismatch(_) => 5,
            CliError::Io(_) | CliError::Other(_) => 1,
        }
    }
}

impl From<SamplingError> for CliError {
    fn from(e: SamplingError) -> Self {
        match e {
            SamplingError::TruncationBudgetExceeded { .. } => CliError::Truncation(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<EstimatorError> for CliError {
    fn from(e: EstimatorError) -> Self {
        match e {
            EstimatorError::Sampling(s) => s.into(),
            EstimatorError::BracketInvalid(_) => CliError::Bracket(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<ExplorationError> for CliError {
    fn from(e: ExplorationError) -> Self {
        match e {
            ExplorationError::Estimator(inner) => inner.into(),
            ExplorationError::Precondition(_) => CliError::Config(e.to_string()),
            ExplorationError::ConditioningTooRare { .. } => CliError::Other(e.to_string()),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Other(e.to_string())
    }
}
