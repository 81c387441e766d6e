use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Argument outside the domain of a thermodynamic function.
    #[error("domain error: {0}")]
    Domain(String),

    /// The state left the admissible region u > u_floor (or the invariants
    /// cannot be inverted).
    #[error("vacuum: {0}")]
    Vacuum(String),

    /// A field or integrated quantity became non-finite.
    #[error("instability: {0}")]
    Instability(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Quadrature did not converge within its budget.
    #[error("divergent integral: {0}")]
    Divergence(String),

    #[error("solver history: {0}")]
    History(String),

    /// Pole of the closed-form Riccati solution.
    #[error("pole at t = {0}")]
    Pole(f64),

    #[error("fit failure: {0}")]
    FitFailure(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("no blow-up: {0}")]
    NoBlowup(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{key}: {message}")]
    Validation { key: String, message: String },

    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    pub(crate) fn validation(key: &str, message: impl Into<String>) -> Self {
        Error::Validation {
            key: key.to_string(),
            message: message.into(),
        }
    }
}
