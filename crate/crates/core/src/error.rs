use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not skew-symmetric: |m + m^T|_F = {0:e}")]
    NotSkew(f64),

    #[error("matrix is not a rotation: |m^T m - I|_F = {orth_err:e}, det = {det}")]
    NotRotation { orth_err: f64, det: f64 },

    #[error("vector is not unit-norm: |v| = {0}")]
    NotUnit(f64),

    #[error("degenerate matrix: det = {0:e}")]
    Degenerate(f64),

    /// Pointing direction and its reference are (numerically) opposite; the
    /// error normalization is singular there.
    #[error("antipodal pointing configuration: q^T q_d = {0}")]
    Antipodal(f64),

    #[error("inertia matrix is singular or not positive definite (min eigenvalue {0:e})")]
    SingularInertia(f64),

    #[error("invalid gain structure: {0}")]
    InvalidGainStructure(String),

    #[error("gains are not certifiable: {0}")]
    NotCertifiable(String),

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("non-uniform time grid at sample {0}")]
    NonUniformGrid(usize),

    #[error("state left finite range at t = {t}")]
    NonFinite { t: f64 },

    #[error("parse error at {line}:{column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid value for `{field}`: {constraint}")]
    Validation { field: String, constraint: String },

    #[error("{0}")]
    Io(String),
}

impl Error {
    pub fn validation(field: impl Into<String>, constraint: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            constraint: constraint.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
