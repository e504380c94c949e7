use thiserror::Error;

/// Errors produced by the simulation and analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid pulse sequence: {0}")]
    InvalidSequence(String),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("step size {dt} us is too coarse; the fastest rate requires dt <= {limit} us")]
    StepTooCoarse { dt: f64, limit: f64 },

    #[error("integration diverged at t = {time} us")]
    Divergence { time: f64 },

    #[error("steady state has a pole: {0}")]
    Pole(String),

    #[error("beat record is undersampled: {0}")]
    Undersampled(String),

    #[error("gate [{start}, {end}] us does not overlap the record")]
    EmptyGate { start: f64, end: f64 },

    #[error("insufficient signal for a beat estimate: {0}")]
    InsufficientSignal(String),

    #[error("fit did not converge: {0}")]
    NoConvergence(String),

    #[error("csv export failed: {0}")]
    Export(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Export(e.to_string())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Export(e.to_string())
    }
}
