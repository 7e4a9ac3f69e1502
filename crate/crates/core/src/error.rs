use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A model parameter fell outside its admissible range.
    #[error("invalid `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    /// The rate handed to the PSNR model does not cover the base layer.
    #[error("base layer not delivered: rate {rate} kb below base rate {base} kb")]
    BaseLayerMissing { rate: f64, base: f64 },

    #[error("a tunnel needs at least one link")]
    EmptyPath,

    #[error("instance too large for exhaustive search: {0}")]
    InstanceTooLarge(String),

    #[error("unknown scheme `{name}` for {mode} mode")]
    UnknownScheme { name: String, mode: &'static str },

    #[error("scenario: {0}")]
    Scenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

/// Checks `0 <= p <= 1` (and finiteness) for a named probability.
pub(crate) fn check_probability(field: &str, p: f64) -> Result<()> {
    if p.is_finite() && (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("{p} is not a probability in [0, 1]")))
    }
}

/// Checks `0 < p < 1`.
pub(crate) fn check_open_probability(field: &str, p: f64) -> Result<()> {
    if p.is_finite() && p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("{p} must lie strictly between 0 and 1")))
    }
}
