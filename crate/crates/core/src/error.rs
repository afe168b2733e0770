use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("margin is NaN")]
    NanMargin,

    #[error("efficiency must be non-negative, got {0}")]
    NegativeEfficiency(f64),

    #[error("leftover budget fraction {0} outside [0, 1]")]
    BudgetFraction(f64),

    #[error("{kind} index {index} out of range (size {size})")]
    OutOfRange {
        kind: &'static str,
        index: usize,
        size: usize,
    },

    #[error("no pCTR for publisher {publisher} and campaign {campaign}")]
    MissingPctr { publisher: u32, campaign: u32 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("unsupported {what} version {found} (expected {expected})")]
    Version {
        what: &'static str,
        found: u32,
        expected: u32,
    },

    #[error("malformed {what}: {detail}")]
    Malformed { what: &'static str, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
