use alloc::string::String;

/// Failure classes shared by every analysis and simulation routine.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid label law: {0}")]
    InvalidLaw(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("s = {s} lies outside the moment domain")]
    Domain { s: f64 },
    #[error("matrix has a non-positive or non-finite entry at ({row}, {col})")]
    NonPositiveMatrix { row: usize, col: usize },
    #[error(
        "power iteration did not converge after {iterations} iterations (residual {residual:e})"
    )]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("bracketing failed: {0}")]
    BracketingFailure(String),
    #[error("assumption violated: {0}")]
    AssumptionViolation(Assumption),
    #[error("label logs do not lie on a common lattice")]
    NotLattice,
    #[error("only {hits} hits observed (need at least {required})")]
    InsufficientHits { hits: u64, required: u64 },
    #[error("budget exceeded: {requested} > {budget}")]
    MemoryBudgetExceeded { requested: u64, budget: u64 },
    #[error("unsupported law: {0}")]
    UnsupportedLaw(String),
}

/// Which modelling hypothesis failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Assumption {
    /// `lambda < 1` fails: the count is a.s. infinite.
    FiniteRegime,
    /// `lambda` sits inside the critical band around 1.
    CriticalRegime,
    /// `mu = -Lambda'(0) > 0` fails.
    PositiveDrift,
}

impl core::fmt::Display for Assumption {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Assumption::FiniteRegime => f.write_str("lambda < 1 (finite regime)"),
            Assumption::CriticalRegime => {
                f.write_str("lambda is within the critical band around 1")
            }
            Assumption::PositiveDrift => f.write_str("mu = -Lambda'(0) > 0"),
        }
    }
}

pub type Result<T> = core::result::Result<T, Error>;
