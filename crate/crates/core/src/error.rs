use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension {0}: need d >= 2")]
    InvalidDimension(usize),
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("cannot parse Pauli string {input:?}: {reason}")]
    PauliParse { input: String, reason: String },
    #[error("generator {label:?} is not Hermitian (deviation {deviation:.3e})")]
    NotHermitian { label: String, deviation: f64 },
    #[error("linearly dependent control channels: {0:?}")]
    DependentChannels(Vec<String>),
    #[error("gate is not unitary (max |U†U - I| = {deviation:.3e})")]
    NotUnitary { deviation: f64 },
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("singular control feedback: {0}")]
    SingularFeedback(String),
    #[error("propagation diverged at t = {t}")]
    Divergence { t: f64 },
    #[error("invalid control trajectory: {0}")]
    Controls(String),
    #[error("boundary value solver: {0}")]
    Bvp(#[from] lobatto_bvp::BvpError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Format {
            path: path.into(),
            message: message.to_string(),
        }
    }
}
