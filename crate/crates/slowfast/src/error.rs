//! Error type shared by all modules.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, SimError>;

#[derive(Debug, Error)]
pub enum SimError {
    /// A precondition on operation inputs was violated.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A coefficient model failed validation.
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// The integrated state left the admissible region (non-finite or
    /// norm above the blow-up threshold). `sample` is set when the failure
    /// occurred inside a Monte Carlo loop.
    #[error("simulation blew up at t = {time}{}", fmt_sample(.sample))]
    BlowUp { time: f64, sample: Option<u64> },

    /// Too few usable points to fit a convergence rate.
    #[error("insufficient data for rate fit: {reason}")]
    InsufficientData { reason: String },

    /// A configuration value failed validation; `field` names the key.
    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn fmt_sample(sample: &Option<u64>) -> String {
    match sample {
        Some(i) => format!(" (sample {i})"),
        None => String::new(),
    }
}

impl SimError {
    /// Attach a Monte Carlo sample index to a blow-up error.
    pub fn with_sample(self, index: u64) -> SimError {
        match self {
            SimError::BlowUp { time, .. } => SimError::BlowUp {
                time,
                sample: Some(index),
            },
            other => other,
        }
    }

    /// Process exit code used by the CLI: 2 validation, 3 blow-up,
    /// 4 insufficient data, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::InvalidInput(_) | SimError::InvalidModel(_) | SimError::Config { .. } => 2,
            SimError::BlowUp { .. } => 3,
            SimError::InsufficientData { .. } => 4,
            SimError::Io(_) => 1,
        }
    }
}
