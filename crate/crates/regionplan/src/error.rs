use thiserror::Error;

/// Errors produced by the planning toolkit.
#[derive(Error, Debug)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("projection did not converge after {iterations} iterations (|F| = {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("no goal-terminated sequence found within the length limit")]
    NoSequence,

    #[error("mixture has no decodable components")]
    EmptyMixture,

    #[error("goal sampling failed after {attempts} attempts")]
    GoalSampling { attempts: usize },

    #[error("invalid start state: {0}")]
    InvalidStart(String),

    #[error("invalid goal state: {0}")]
    InvalidGoal(String),

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
