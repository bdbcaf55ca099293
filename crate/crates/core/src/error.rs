use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid platform: {0}")]
    InvalidPlatform(String),

    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("invalid DAG: {0}")]
    InvalidDag(String),

    #[error("rank-deficient design matrix; collinear columns: {}", .columns.join(", "))]
    RankDeficient { columns: Vec<String> },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("arity mismatch: expected {expected} inputs, got {got}")]
    Arity { expected: usize, got: usize },

    #[error("sampling frequencies must differ (both {0} GHz)")]
    EqualFrequencies(f64),

    #[error("missing profile for cluster {cluster} with {n_cores} cores")]
    MissingProfile { cluster: String, n_cores: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("simulation error: {0}")]
    Simulation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
