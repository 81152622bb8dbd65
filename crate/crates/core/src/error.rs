use thiserror::Error;

/// Errors raised across simulation, correlation, reconstruction and fitting.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("state is not normalized (norm {0})")]
    NotNormalized(f64),

    #[error("no SYNC records in stream")]
    NoSync,

    #[error("zero counts in side peaks")]
    ZeroSideCounts,

    #[error("missing measurement setting(s): {0}")]
    MissingSettings(String),

    #[error("inconsistent histogram grids: {0}")]
    InconsistentGrid(String),

    #[error("empty delay window")]
    EmptyWindow,

    #[error("singular normal equations (condition number {condition:.3e})")]
    Singular { condition: f64 },

    #[error("optimizer did not converge after {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
