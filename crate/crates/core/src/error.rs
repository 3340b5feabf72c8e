use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate document id `{0}`")]
    DuplicateId(String),

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("wordpiece capacity {capacity} is smaller than the observed alphabet ({alphabet} symbols)")]
    CapacityTooSmall { capacity: usize, alphabet: usize },

    #[error("empty token set")]
    EmptySet,

    #[error("anchor `{0}` does not occur in any document")]
    AnchorAbsent(String),

    #[error("profile mismatch: {0}")]
    ProfileMismatch(String),

    #[error("zero vector for `{0}`")]
    ZeroVector(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("missing document id `{0}`")]
    MissingDocId(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("pool exhausted at iteration {iteration}: need {needed}, {available} remaining")]
    PoolExhausted {
        iteration: usize,
        needed: usize,
        available: usize,
    },

    #[error("monitor baseline is not initialized")]
    BaselineUninitialized,

    #[error("run directory is missing artifacts: {}", .0.join(", "))]
    MissingArtifacts(Vec<String>),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Process exit code: 2 for invariant violations, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Invariant(_) => 2,
            Error::Stage { source, .. } => source.exit_code(),
            _ => 1,
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| Error::Stage {
            stage,
            source: Box::new(e),
        })
    }
}
