use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the lab.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("malformed step distribution: {0}")]
    MalformedDistribution(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("resource cap exceeded: {what} needs {needed}, cap is {cap}")]
    CapExceeded {
        what: &'static str,
        needed: u128,
        cap: u128,
    },

    #[error("root finder did not converge: {0}")]
    NoConvergence(String),

    #[error("budget unreachable: {0}")]
    BudgetUnreachable(String),

    #[error("verification failed: {0}")]
    VerificationFailed(String),

    #[error("minimizer at grid boundary: {0}")]
    GridBoundary(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
}

impl LabError {
    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::MalformedDistribution(_)
            | LabError::InvalidArgument(_)
            | LabError::Unsupported(_)
            | LabError::Config(_) => 1,
            LabError::Io { .. } | LabError::Format { .. } => 3,
            _ => 2,
        }
    }

    /// Short snake_case tag used in status columns.
    pub fn kind(&self) -> &'static str {
        match self {
            LabError::MalformedDistribution(_) => "malformed_distribution",
            LabError::InvalidArgument(_) => "invalid_argument",
            LabError::Unsupported(_) => "unsupported",
            LabError::CapExceeded { .. } => "cap_exceeded",
            LabError::NoConvergence(_) => "no_convergence",
            LabError::BudgetUnreachable(_) => "budget_unreachable",
            LabError::VerificationFailed(_) => "verification_failed",
            LabError::GridBoundary(_) => "grid_boundary",
            LabError::Config(_) => "config",
            LabError::Io { .. } => "io",
            LabError::Format { .. } => "format",
        }
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
