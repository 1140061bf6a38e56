use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("grid functions live on different meshes")]
    MeshMismatch,

    #[error("invalid value for `{field}`: {value} ({constraint})")]
    InvalidParameter {
        field: String,
        value: f64,
        constraint: &'static str,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("input function is identically zero")]
    ZeroFunction,

    #[error("denominator vanishes: G annihilates the direction (value {0:e})")]
    DegenerateDenominator(f64),

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("iteration did not converge: {0}")]
    NoConvergence(String),

    #[error("cannot parse operator spec `{input}`: {reason}")]
    OperatorSyntax { input: String, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(field: impl Into<String>, value: f64, constraint: &'static str) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            value,
            constraint,
        }
    }
}
