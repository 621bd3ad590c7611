use thiserror::Error;

/// Errors raised by the simulator, its reference oracle and the harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{name} = {value} is outside the allowed range {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not {kind} (deviation {deviation:.3e})")]
    NotStructured { kind: &'static str, deviation: f64 },

    #[error("particle-hole pairing violated: eigenvalues {lo} and {hi} do not cancel")]
    PairingViolated { lo: f64, hi: f64 },

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error("top-left Bogoliubov block is singular (smallest singular value {smallest:.3e})")]
    SingularBlock { smallest: f64 },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("system of {n} sites exceeds the limit of {limit} for this operation")]
    TooLarge { n: usize, limit: usize },

    #[error("rank deficiency: found rank {found}, expected {expected} after {draws} draws")]
    RankDeficient {
        found: usize,
        expected: usize,
        draws: usize,
    },

    #[error("{0} verification checks failed")]
    VerificationFailed(usize),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serialization(String),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
