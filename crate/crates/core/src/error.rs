use thiserror::Error;

/// Errors raised across the simulator and its oracles.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is singular (pivot magnitude {pivot:e} below tolerance)")]
    SingularMatrix { pivot: f64 },

    #[error("matrix is not row-stochastic: {0}")]
    NotStochastic(String),

    #[error("chain has no unique stationary distribution")]
    NoUniqueStationary,

    #[error("power iteration did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("index out of range: {what} = {index} (limit {limit})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        limit: usize,
    },

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("feature matrix stayed rank deficient after {attempts} attempts")]
    RankDeficientFeatures { attempts: usize },

    #[error("behavior probability is zero for agent {agent}, state {state}, action {action}")]
    ZeroBehaviorProbability {
        agent: usize,
        state: usize,
        action: usize,
    },

    #[error("importance ratio must be positive, got {0}")]
    NonPositiveRatio(f64),

    #[error("emphatic system matrix C is singular")]
    SingularC,

    #[error("joint action space too large for enumeration: {size} > {limit}")]
    InstanceTooLarge { size: usize, limit: usize },

    #[error("non-finite value in {what}{}", agent.map(|a| format!(" (agent {a})")).unwrap_or_default())]
    NonFinite {
        what: &'static str,
        agent: Option<usize>,
    },

    #[error("invalid configuration ({assumption}): {reason}")]
    ConfigInvalid {
        assumption: &'static str,
        reason: String,
    },

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn config(assumption: &'static str, reason: impl Into<String>) -> Self {
        Error::ConfigInvalid {
            assumption,
            reason: reason.into(),
        }
    }

    pub(crate) fn parse(line: usize, reason: impl Into<String>) -> Self {
        Error::Parse {
            line,
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
