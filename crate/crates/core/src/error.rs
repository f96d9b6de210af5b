use thiserror::Error;

/// Errors raised by the compilation toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimMismatch { expected: usize, actual: usize },

    #[error("parameter length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("invalid qubit count {0}: at least two qubits are required")]
    InvalidQubitCount(usize),

    #[error("unknown gate: {0}")]
    UnknownGate(String),

    #[error("invalid Trotter depth {0}: must be at least 1")]
    InvalidDepth(usize),

    #[error("invalid layer time {0}: must be positive")]
    InvalidLayerTime(f64),

    #[error("{name} = {value} is outside [{min}, {max}]")]
    OutOfRange {
        name: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("gradients are only available for noiseless cost modes")]
    NoisyModeUnsupported,

    #[error("noise amplitude must be non-negative, got {0}")]
    NegativeAmplitude(f64),

    #[error("line search failed to find a sufficient decrease at iteration {iteration}")]
    LineSearchFailure { iteration: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Whether the error comes from invalid user input (config, target,
    /// depth, ranges) rather than from the numerics.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::Parse(_)
                | Error::UnknownGate(_)
                | Error::InvalidDepth(_)
                | Error::InvalidLayerTime(_)
                | Error::InvalidQubitCount(_)
                | Error::OutOfRange { .. }
                | Error::NegativeAmplitude(_)
        )
    }
}
