use std::path::PathBuf;

use branch_exponent_core::Error as CoreError;

/// Process exit codes, one per failure class.
pub mod exit {
    pub const OK: i32 = 0;
    pub const OTHER: i32 = 1;
    pub const PARSE: i32 = 2;
    pub const VALIDATION: i32 = 3;
    pub const ASSUMPTION: i32 = 4;
    pub const CONVERGENCE: i32 = 5;
    pub const BUDGET: i32 = 6;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid configuration:\n{}", format_list(.0))]
    Validation(Vec<String>),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("writing CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("writing JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{failed} verification check(s) failed")]
    VerificationFailed { failed: usize },
}

fn format_list(items: &[String]) -> String {
    items
        .iter()
        .map(|s| format!("  - {s}"))
        .collect::<Vec<_>>()
        .join("\n")
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => exit::PARSE,
            CliError::Validation(_) => exit::VALIDATION,
            CliError::Core(e) => match e {
                CoreError::InvalidLaw(_)
                | CoreError::InvalidModel(_)
                | CoreError::InvalidArgument(_)
                | CoreError::UnsupportedLaw(_) => exit::VALIDATION,
                CoreError::AssumptionViolation(_) => exit::ASSUMPTION,
                CoreError::NoConvergence { .. }
                | CoreError::BracketingFailure(_)
                | CoreError::NonPositiveMatrix { .. }
                | CoreError::InsufficientHits { .. } => exit::CONVERGENCE,
                CoreError::MemoryBudgetExceeded { .. } => exit::BUDGET,
                CoreError::Domain { .. } | CoreError::NotLattice => exit::OTHER,
            },
            CliError::Io { .. }
            | CliError::Csv(_)
            | CliError::Json(_)
            | CliError::VerificationFailed { .. } => exit::OTHER,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
