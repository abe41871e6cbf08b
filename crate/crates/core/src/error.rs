use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unknown benchmark `{0}`")]
    UnknownBenchmark(String),

    #[error("singular covariance: {0}")]
    Singular(String),

    #[error("S-weight overflow: r*(h - shift) = {0} is not representable")]
    WeightOverflow(f64),

    #[error("all importance weights vanished: {0}")]
    ZeroWeights(String),

    #[error("divergence at iteration {t}: {reason}")]
    Divergence {
        t: u64,
        reason: String,
        /// Human-readable dump of the state at the point of failure.
        snapshot: String,
    },

    #[error("oracle grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("config error in `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("config parse error: {0}")]
    Parse(String),

    #[error("mismatched objectives: {0}")]
    MismatchedObjectives(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}
