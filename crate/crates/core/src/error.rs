use thiserror::Error;

pub type Result<T> = std::result::Result<T, MuntzError>;

#[derive(Debug, Error)]
pub enum MuntzError {
    #[error("exponent sequence is empty")]
    EmptySequence,

    #[error("exponent λ_{index} = {value} must be strictly greater than -1/2")]
    ExponentOutOfRange { index: usize, value: f64 },

    #[error("exponents λ_{first} and λ_{second} are {gap:e} apart (minimum gap {gap_epsilon:e})")]
    DuplicateExponent {
        first: usize,
        second: usize,
        gap: f64,
        gap_epsilon: f64,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("classification inconclusive: {0}")]
    InconclusiveClassification(String),

    #[error("coefficient product for index {index} exceeds the representable range")]
    CoefficientOverflow { index: usize },

    #[error("domain error: {0}")]
    DomainError(String),

    #[error("linear system is numerically singular")]
    SingularSystem,

    #[error("ill-conditioned: {what} disagreement {disagreement:e} exceeds {tolerance:e}")]
    IllConditioned {
        what: &'static str,
        disagreement: f64,
        tolerance: f64,
    },

    #[error("infinite product diverges: the exponent sequence fails the Müntz-Szász condition")]
    DivergentProduct,

    #[error("normalizing factor undefined: p_{index} = 1")]
    NormalizationPole { index: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("integrand node at s = 0 with negative exponent λ_{index}")]
    NodeSingularity { index: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl MuntzError {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            MuntzError::CoefficientOverflow { .. }
            | MuntzError::SingularSystem
            | MuntzError::IllConditioned { .. } => 3,
            MuntzError::InconclusiveClassification(_) => 1,
            _ => 2,
        }
    }
}
