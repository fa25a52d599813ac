use rer_core::RerError;

/// Failure of a command, carrying its process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Malformed or missing input.
    Input(anyhow::Error),
    Infeasible(RerError),
    NonConvergence(RerError),
    /// The numerical partition check did not meet its tolerance.
    Theorem(String),
    Other(anyhow::Error),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Other(_) => 1,
            CliError::Input(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::NonConvergence(_) => 4,
            CliError::Theorem(_) => 5,
        }
    }

    pub fn input(e: impl Into<anyhow::Error>) -> Self {
        CliError::Input(e.into())
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(e) => write!(f, "invalid input: {e:#}"),
            CliError::Infeasible(e) => write!(f, "{e}"),
            CliError::NonConvergence(e) => write!(f, "{e}"),
            CliError::Theorem(msg) => write!(f, "{msg}"),
            CliError::Other(e) => write!(f, "{e:#}"),
        }
    }
}

impl From<RerError> for CliError {
    fn from(e: RerError) -> Self {
        match e {
            RerError::Infeasible { .. } => CliError::Infeasible(e),
            RerError::NonConvergence { .. } | RerError::LineSearch { .. } => CliError::NonConvergence(e),
            RerError::Dimension(_)
            | RerError::InvalidArgument(_)
            | RerError::InvalidPoles(_)
            | RerError::Unreachable { .. }
            | RerError::Unstable { .. } => CliError::Input(e.into()),
            _ => CliError::Other(e.into()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(e.into())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
