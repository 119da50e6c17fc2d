use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid step: |{cur} - {prev}| != 1")]
    InvalidStep { prev: i64, cur: i64 },

    #[error("horizon {0} exceeds the enumeration limit of 24 steps")]
    HorizonTooLarge(usize),

    #[error("unsupported exact combination: {0}")]
    Unsupported(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown {kind} `{name}` (available: {available})")]
    UnknownName {
        kind: &'static str,
        name: String,
        available: String,
    },

    #[error("replica {stream} (master seed {seed}) panicked: {message}")]
    ReplicaPanicked {
        seed: u64,
        stream: u64,
        message: String,
    },

    #[error("overflow mass {mass:e} exceeds tolerance {tolerance:e}; raise the cap")]
    Overflow { mass: f64, tolerance: f64 },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
