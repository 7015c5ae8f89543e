//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown environment `{given}`; known environments: {known:?}")]
    UnknownEnv { given: String, known: Vec<&'static str> },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("access violation: {0}")]
    Access(String),

    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    Shape { expected: Vec<usize>, got: Vec<usize> },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("training failed: {0}")]
    Training(String),

    #[error("fingerprint generation exhausted its budget: {0}")]
    GenerationFailure(String),

    #[error("degenerate candidate: averaged gradient is zero everywhere")]
    DegenerateCandidate,

    #[error("state pool too small: episode produced {have} states but {need} are required; use a longer-horizon environment or a smaller sample count")]
    StatePoolTooSmall { have: usize, need: usize },

    #[error("checkpoint format {found} is newer than supported {supported}")]
    FormatVersion { found: String, supported: String },

    #[error("artifact integrity check failed: {0}")]
    Integrity(String),

    #[error("verification impact undefined: test return equals worst-case return ({0})")]
    UndefinedImpact(f64),

    #[error("claim audit failed: {0}")]
    ClaimAudit(String),

    #[error("attack failed: {0}")]
    Attack(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("serialization failure: {0}")]
    Serde(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

impl From<toml::de::Error> for Error {
    fn from(e: toml::de::Error) -> Self {
        Error::Serde(e.to_string())
    }
}
