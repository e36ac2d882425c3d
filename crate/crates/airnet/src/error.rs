use thiserror::Error;

/// Errors raised across the pipeline.
///
/// [`Error::exit_code`] maps each variant onto the CLI contract: input
/// problems exit with 1, numerical trouble with 2.
#[derive(Debug, Error)]
pub enum Error {
    #[error("format error: {0}")]
    Format(String),
    #[error("degenerate trajectory {0}: zero-length polyline")]
    DegenerateTrajectory(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("ambiguous schedule: duplicate (registration, sched_dep) for {}", .0.join(", "))]
    Ambiguous(Vec<String>),
    #[error("lookup error: {0}")]
    Lookup(String),
    #[error("out of range: {0}")]
    Range(String),
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error("path error: {0}")]
    Path(String),
    #[error("truncation overflow: arrival weights vanish for all r <= {n} at load {rho}")]
    TruncationOverflow { rho: f64, n: usize },
    #[error("integration error: {0}")]
    Integration(String),
    #[error("divergence: {0}")]
    Divergence(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::TruncationOverflow { .. } | Error::Integration(_) | Error::Divergence(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
