use thiserror::Error;

pub type Result<T> = std::result::Result<T, GuidanceError>;

#[derive(Debug, Error)]
pub enum GuidanceError {
    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    #[error("invalid desired distribution: {0}")]
    InvalidDistribution(String),

    #[error("bin index {index} out of range for {n_bins} bins")]
    BinOutOfRange { index: usize, n_bins: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("weighting factor omega = {0} is outside [0, 1)")]
    WeightOutOfRange(f64),

    #[error("parameter `{name}` = {value} is invalid, expected {expected}")]
    InvalidParameter {
        name: &'static str,
        value: String,
        expected: &'static str,
    },

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl GuidanceError {
    pub(crate) fn param(name: &'static str, value: impl ToString, expected: &'static str) -> Self {
        GuidanceError::InvalidParameter {
            name,
            value: value.to_string(),
            expected,
        }
    }
}
