use thiserror::Error;

/// Errors raised by scene construction, acoustics and filter design.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum PszError {
    #[error("source and field point coincide (point {point}, speaker {speaker})")]
    CoincidentPoints { point: usize, speaker: usize },

    #[error("frequency must be positive, got {0} Hz")]
    NonPositiveFrequency(f64),

    #[error("unknown listener `{0}` (expected A or B)")]
    UnknownListener(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("frequency mismatch: {left} Hz vs {right} Hz")]
    FrequencyMismatch { left: f64, right: f64 },

    #[error("normal matrix is singular or ill-conditioned at {frequency} Hz (beta = {beta})")]
    IllConditioned { frequency: f64, beta: f64 },

    #[error("rendering mode {mode} incompatible with scene: {reason}")]
    ModeMismatch { mode: &'static str, reason: String },

    #[error("invalid scene: {0}")]
    InvalidScene(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = PszError> = std::result::Result<T, E>;
