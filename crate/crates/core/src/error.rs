use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not antisymmetric (|M + M^T| = {0:e})")]
    NotAntisymmetric(f64),
    #[error("rotation angle {angle} rad is too close to pi for a unique logarithm")]
    NearPi { angle: f64 },
    #[error("matrix is not a proper rotation: {0}")]
    NotRotation(String),
    #[error("cannot project onto SO(3): det = {0:e}")]
    SingularOrReflecting(f64),
    #[error("unknown {kind} `{name}`")]
    UnknownName { kind: &'static str, name: String },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("time {t} s is outside the sampled coverage [{start}, {end}]")]
    OutOfCoverage { t: f64, start: f64, end: f64 },
    #[error("Riccati matrix lost positive definiteness at t = {t} s (min eigenvalue {min_eig:e})")]
    NotPositiveDefinite { t: f64, min_eig: f64 },
    #[error("{what} is not symmetric positive definite")]
    NotSpd { what: &'static str },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("attitude Gramian is singular: lambda_min = {lambda_min:e}")]
    AttitudeGramianSingular { lambda_min: f64 },
    #[error("step {index} failed: {source}")]
    Step {
        index: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("row {row}: {msg}")]
    Row { row: usize, msg: String },
    #[error("no overlapping time support between estimate and reference")]
    NoOverlap,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics (as opposed to bad input data).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NotPositiveDefinite { .. }
            | Error::NearPi { .. }
            | Error::SingularOrReflecting(_)
            | Error::AttitudeGramianSingular { .. } => true,
            Error::Step { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
