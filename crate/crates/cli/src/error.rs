use gridstate_core::Error as CoreError;
use thiserror::Error;

/// Failures of a CLI command, one variant per exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Physics(String),
    #[error("{0}")]
    Solver(String),
    #[error("{0}")]
    Certification(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Parse(_) => 2,
            CliError::Physics(_) => 3,
            CliError::Solver(_) => 4,
            CliError::Certification(_) => 5,
        }
    }

    /// Classifies a core error raised while building or solving a system.
    pub fn from_core(context: &str, e: CoreError) -> Self {
        let msg = format!("{context}: {e}");
        match e {
            CoreError::Validation(_) | CoreError::Params(_) | CoreError::Topology(_) => CliError::Physics(msg),
            CoreError::InvalidArgument(_) | CoreError::Dimension { .. } => CliError::Parse(msg),
            CoreError::Verification(_) => CliError::Certification(msg),
            CoreError::LoadDomain { .. }
            | CoreError::Singular(_)
            | CoreError::NewtonDiverged { .. }
            | CoreError::OmegaZeroInfeasible { .. }
            | CoreError::Step { .. } => CliError::Solver(msg),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
