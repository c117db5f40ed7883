use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("Feller condition violated: kappa*theta/gamma^2 = {ratio} must exceed 1/2")]
    FellerViolation { ratio: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numeric overflow: {0}")]
    Overflow(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("grid mismatch: time {time} is not on the sampled grid (t0 = {t0}, spacing = {spacing})")]
    GridMismatch { time: f64, t0: f64, spacing: f64 },

    #[error("horizon too short: need at least {required}, have {available}")]
    HorizonTooShort { required: f64, available: f64 },

    #[error("insufficient data: {n} observations cannot support lag index {lag}")]
    InsufficientData { n: usize, lag: usize },

    #[error("degenerate estimate: {0}")]
    EstimationDegenerate(String),

    #[error("invalid path dump: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag for the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::FellerViolation { .. } => "feller_violation",
            Error::Domain(_) => "domain_error",
            Error::Overflow(_) => "overflow",
            Error::Config(_) => "config_error",
            Error::GridMismatch { .. } => "grid_mismatch",
            Error::HorizonTooShort { .. } => "horizon_too_short",
            Error::InsufficientData { .. } => "insufficient_data",
            Error::EstimationDegenerate(_) => "estimation_degenerate",
            Error::Format(_) => "format_error",
            Error::Io(_) => "io_error",
            Error::Json(_) => "json_error",
        }
    }

    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::FellerViolation { .. } | Error::GridMismatch { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
