use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid intersection spec: {field}: {reason}")]
    Invalid { field: &'static str, reason: String },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReservationError {
    #[error("no assignment status for vehicle {0} this step")]
    UnknownVehicle(u64),
}

#[derive(Debug, Error)]
pub enum RlError {
    #[error("non-finite state input at index {0}")]
    NonFiniteState(usize),
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimMismatch { what: &'static str, expected: usize, got: usize },
    #[error("replay memory holds {have} experiences, need {need}")]
    NotEnoughSamples { have: usize, need: usize },
    #[error("non-finite {0} loss; update aborted")]
    NonFiniteLoss(&'static str),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config field `{field}`: {reason}")]
    Field { field: String, reason: String },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl ConfigError {
    pub fn field(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError::Field { field: field.into(), reason: reason.into() }
    }
}

impl From<GeometryError> for ConfigError {
    fn from(e: GeometryError) -> Self {
        match e {
            GeometryError::Invalid { field, reason } => ConfigError::field(format!("intersection.{field}"), reason),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("event log is empty")]
    EmptyLog,
    #[error("event log is not time-ordered at step {0}")]
    Unordered(u64),
}

/// Errors surfaced by run orchestration.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Rl(#[from] RlError),
    #[error(transparent)]
    Reservation(#[from] ReservationError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("missing checkpoint: {0}")]
    MissingCheckpoint(String),
    #[error("{0}")]
    Other(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
