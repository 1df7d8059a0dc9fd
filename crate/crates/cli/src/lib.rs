//! Experiment front end for the scheme-synthesis library: scenario configs,
//! trajectory runs with CSV/JSON reports, and threshold-search emulation.

pub mod commands;
pub mod config;
pub mod report;
pub mod scenario;

/// Errors mapped onto the process exit codes: config problems exit 3,
/// infeasibility 2, a mid-run margin failure 4, an empty oracle 5, IO and
/// other runtime failures 1.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Infeasible(String),
    #[error("margin exhausted at step {step}, dimension {dim} (candidate {candidate})")]
    Margin { candidate: usize, step: usize, dim: usize },
    #[error("no candidate satisfies the oracle feasibility conditions")]
    NoFeasibleCandidate,
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Run(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) | CliError::Run(_) => 1,
            CliError::Infeasible(_) => 2,
            CliError::Config(_) => 3,
            CliError::Margin { .. } => 4,
            CliError::NoFeasibleCandidate => 5,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
