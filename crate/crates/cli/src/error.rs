use std::path::Path;
use std::process::ExitCode;

use devscreen_core::casebase::CaseBaseError;
use devscreen_core::engine::{EngineError, EvaluationError, ProviderUnreadable};
use devscreen_core::scale::ScaleError;
use devscreen_core::similarity::SimilarityError;

/// Every failure is either bad input (exit 1) or a filesystem problem (exit 2).
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Validation(_) => ExitCode::from(1),
            CliError::Io(_) => ExitCode::from(2),
        }
    }

    pub fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{}: {err}", path.display()))
    }

    pub fn invalid(path: &Path, err: impl std::fmt::Display) -> Self {
        CliError::Validation(format!("{}: {err}", path.display()))
    }
}

pub type CliResult<T> = Result<T, CliError>;

impl From<ScaleError> for CliError {
    fn from(e: ScaleError) -> Self {
        match e {
            ScaleError::Io(_) => CliError::Io(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<SimilarityError> for CliError {
    fn from(e: SimilarityError) -> Self {
        match e {
            SimilarityError::Io(_) => CliError::Io(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<CaseBaseError> for CliError {
    fn from(e: CaseBaseError) -> Self {
        match e {
            CaseBaseError::Io(_) => CliError::Io(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Scale(e) => e.into(),
            EngineError::Similarity(e) => e.into(),
            EngineError::CaseBase(e) => e.into(),
            EngineError::SessionClosed(_) => CliError::Validation(e.to_string()),
        }
    }
}

impl From<EvaluationError> for CliError {
    fn from(e: EvaluationError) -> Self {
        match e {
            EvaluationError::Io(_) => CliError::Io(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<ProviderUnreadable> for CliError {
    fn from(e: ProviderUnreadable) -> Self {
        CliError::Io(format!("bone-age table: {}", e.0))
    }
}
