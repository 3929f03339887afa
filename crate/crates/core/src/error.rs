use thiserror::Error;

/// Errors produced by the factorization, pursuit and oracle routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("shape mismatch: expected {expected:?}, got {found:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("input contains non-finite values")]
    NonFinite,

    /// The maximization direction is zero (or has no admissible entries),
    /// so no atom correlates with it. Callers typically retry with a fresh
    /// random initialization.
    #[error("degenerate direction: no atom correlates with the input")]
    DegenerateDirection,

    /// Every restart of the power method degenerated; the operand is
    /// numerically zero relative to the atom set.
    #[error("LMO failure: target is numerically zero relative to the atom set")]
    LmoFailure,

    #[error("invalid atom spec: {0}")]
    InvalidSpec(String),

    #[error("invalid atom: {0}")]
    InvalidAtom(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("term list is empty")]
    EmptyTerms,

    #[error("dictionary is empty")]
    EmptyDictionary,

    #[error("dictionary atoms must be unit-norm")]
    NotNormalized,

    #[error("{name} out of range: {detail}")]
    OutOfRange { name: &'static str, detail: String },

    #[error("oracle limit exceeded: {0}")]
    OracleLimit(String),
}

pub type Result<T> = std::result::Result<T, Error>;
