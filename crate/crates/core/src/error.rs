use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("inadmissible endpoint {endpoint} for a {steps}-step walk")]
    InadmissibleEndpoint { steps: u64, endpoint: i64 },

    #[error("invalid lattice loop: {0}")]
    InvalidLoop(String),

    #[error("invalid walk path: {0}")]
    InvalidWalk(String),

    #[error("parameter `{name}` out of range: {reason}")]
    OutOfRange { name: &'static str, reason: String },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("intensity {requested} exceeds the field horizon {lambda_max}")]
    BeyondHorizon { requested: f64, lambda_max: f64 },

    #[error("malformed soup document: {0}")]
    Schema(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn out_of_range(name: &'static str, reason: impl Into<String>) -> Error {
    Error::OutOfRange { name, reason: reason.into() }
}
