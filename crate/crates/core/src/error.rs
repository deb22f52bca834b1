use thiserror::Error;

/// Errors raised by the interpolation toolkit.
///
/// Variants fall into three families, see [`Error::class`]: malformed input,
/// mathematical infeasibility, and numerical breakdown.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid alphabet: N = 0 admits no words of length {length}")]
    InvalidAlphabet { length: usize },

    #[error("invalid word: letter {letter} outside 1..={alphabet}")]
    InvalidWord { letter: usize, alphabet: usize },

    #[error("the empty word has no first letter")]
    EmptyWord,

    #[error("shape error: {0}")]
    Shape(String),

    #[error("matrix is not hermitian: asymmetry {asymmetry:.3e} exceeds {allowed:.3e}")]
    NotHermitian { asymmetry: f64, allowed: f64 },

    #[error("matrix is not positive semidefinite: min eigenvalue {min_eig:.6e}")]
    NotPsd { min_eig: f64 },

    #[error("gram mismatch between column maps: {defect:.3e} exceeds {allowed:.3e}")]
    GramMismatch { defect: f64, allowed: f64 },

    #[error("displacement map is numerically singular (condition {condition:.3e})")]
    SingularMap { condition: f64 },

    #[error("point is not in the open unit ball: margin {margin:.6}")]
    NotInBall { margin: f64 },

    #[error("series needs depth {needed} which exceeds the cap {cap}")]
    DepthExceeded { needed: usize, cap: usize },

    #[error("geometric decay of level norms not established (last ratio {ratio:.6})")]
    DecayNotEstablished { ratio: f64 },

    #[error("points {first} and {second} coincide")]
    DuplicatePoints { first: usize, second: usize },

    #[error("internal cross-check failed: {what} disagree by {defect:.3e}")]
    CrossCheckFailure { what: String, defect: f64 },

    #[error("problem is infeasible: min eigenvalue {min_eig:.6e}")]
    Infeasible { min_eig: f64 },

    #[error("truncation level {level} exceeds element degree {degree}")]
    TruncationExceeded { level: usize, degree: usize },

    #[error("word of length {length} needs derivative order at least {length}, got {order}")]
    OrderTooSmall { length: usize, order: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("format error: {0}")]
    Format(String),
}

/// Coarse classification used by the command-line exit-code contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Input,
    Infeasible,
    Numerical,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Infeasible { .. } => ErrorClass::Infeasible,
            Error::NotHermitian { .. }
            | Error::NotPsd { .. }
            | Error::GramMismatch { .. }
            | Error::SingularMap { .. }
            | Error::DepthExceeded { .. }
            | Error::DecayNotEstablished { .. }
            | Error::CrossCheckFailure { .. } => ErrorClass::Numerical,
            _ => ErrorClass::Input,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn shape(msg: impl Into<String>) -> Error {
    Error::Shape(msg.into())
}
