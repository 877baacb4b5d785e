use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Which side of `0 < q < min{2 - 2α, 1 - 2L/k²}` an energy order violates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QViolation {
    NonPositive,
    SteepnessLimit,
    NoiseLimit,
}

impl std::fmt::Display for QViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            QViolation::NonPositive => write!(f, "q must be > 0"),
            QViolation::SteepnessLimit => write!(f, "q must be < 2 - 2*alpha"),
            QViolation::NoiseLimit => write!(f, "q must be < 1 - 2L/k^2"),
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("integration blew up at step {step}")]
    Blowup { step: u64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error("unknown controller scheme `{0}`")]
    UnknownScheme(String),

    #[error("bound undefined: k = {k} is not above the feasibility threshold for L = {lipschitz}")]
    Infeasible { k: f64, lipschitz: f64 },

    #[error("bound undefined: inadmissible energy order q = {q} ({violation})")]
    InadmissibleQ { q: f64, violation: QViolation },

    #[error("one-sided Lipschitz constant L unavailable for model `{0}`")]
    LipschitzUnavailable(String),

    #[error("{0}")]
    Other(String),
}

impl Error {
    pub(crate) fn param(name: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.to_string(),
            reason: reason.into(),
        }
    }
}
