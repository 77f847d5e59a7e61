use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to parse {what}: {source}")]
    Parse {
        what: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("unknown slot `{0}`")]
    UnknownSlot(String),

    #[error("unknown intent `{0}`")]
    UnknownIntent(String),

    #[error("slot `{0}` is not informable")]
    NotInformable(String),

    #[error("invalid dialog act: {0}")]
    InvalidAct(String),

    #[error("invalid goal: {0}")]
    InvalidGoal(String),

    #[error("invalid corpus: {0}")]
    Corpus(String),

    #[error("goal database is empty")]
    EmptyGoalDatabase,

    #[error("episode is already over")]
    EpisodeOver,

    #[error("episode has not terminated yet")]
    EpisodeNotOver,

    #[error("turn parity violation: expected turn {expected}, got {got}")]
    Parity { expected: u32, got: u32 },

    #[error("agent used before initialize_episode")]
    AgentNotInitialized,

    #[error("agent called in an unanticipated way: {0}")]
    AgentExhausted(String),

    #[error("action index {index} out of range (action space has {size} actions)")]
    ActionOutOfRange { index: usize, size: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("non-finite value during training: {0}")]
    NonFinite(String),

    #[error("experience pool is empty")]
    EmptyPool,

    #[error("noise model: {0}")]
    Noise(String),

    #[error("template: {0}")]
    Template(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("session `{0}` not found")]
    SessionNotFound(String),

    #[error("session `{0}` has ended")]
    SessionClosed(String),

    #[error("session `{0}` is busy with another action")]
    SessionBusy(String),

    #[error("could not understand `{0}`")]
    Unparsed(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(what: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Parse {
            what: what.into(),
            source,
        }
    }
}
