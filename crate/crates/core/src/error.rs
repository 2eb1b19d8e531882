use thiserror::Error;

/// Errors produced by the noise engine.
#[derive(Debug, Error)]
pub enum Error {
    /// Physical parameters violate a hard constraint.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// The semiclassical balance equations cannot be satisfied.
    #[error("inconsistent steady state: {0}")]
    InconsistentSteadyState(String),

    /// A statistical parameter lies outside its admissible range.
    #[error("out of range: {0}")]
    OutOfRange(String),

    /// Bad input to an estimator or factorization routine.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The resolvent (-i omega I - A) is singular at a grid point.
    #[error("singular resolvent at omega = {omega}")]
    SingularResolvent { omega: f64 },

    /// An internal consistency check failed (e.g. a spectral diagonal came
    /// out complex beyond tolerance).
    #[error("numerical consistency violated: {0}")]
    NumericalConsistency(String),

    /// The drift matrix has an eigenvalue with nonnegative real part.
    #[error("unstable drift matrix: {0}")]
    UnstableDrift(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
