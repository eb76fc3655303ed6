use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid parameters, mismatched lengths or out-of-range scenario inputs.
    #[error("configuration error: {0}")]
    Config(String),

    /// A state or action contained NaN or infinity.
    #[error("corrupted state: {0}")]
    CorruptedState(String),

    /// Two vehicles share the same position, so the barrier gradient is undefined.
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("failed to parse configuration: {0}")]
    Parse(#[from] toml::de::Error),

    #[error("failed to serialize configuration: {0}")]
    Serialize(#[from] toml::ser::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// True for errors caused by user input rather than a failed run.
    pub fn is_configuration(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Parse(_))
    }
}
