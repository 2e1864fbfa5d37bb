use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("integration failed: {0}")]
    Integration(String),
    #[error("inconsistent evaluations: {what} differ by {discrepancy:e} (tolerance {tolerance:e})")]
    Inconsistency {
        what: String,
        discrepancy: f64,
        tolerance: f64,
    },
    #[error("precondition violated: {0}")]
    Contract(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("no sign change on bracket [{lo}, {hi}]: Q = ({q_lo:e}, {q_hi:e})")]
    Bracket { lo: f64, hi: f64, q_lo: f64, q_hi: f64 },
    #[error("synthesis failed: {0}")]
    Synthesis(String),
    #[error("ill-conditioned moment system (condition number {condition:e})")]
    IllConditioned { condition: f64 },
    #[error("endpoint outside the linear regime: distance {distance:e} exceeds {radius:e}")]
    OutOfNeighborhood { distance: f64, radius: f64 },
    #[error("experiment failed: {0}")]
    Experiment(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
