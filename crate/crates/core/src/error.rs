use thiserror::Error;

use crate::boolmin::MinimizeError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("unknown agent `{0}`")]
    UnknownAgent(String),
    #[error("unknown predicate `{0}`")]
    UnknownPredicate(String),
    #[error("unknown action `{0}`")]
    UnknownAction(String),
    #[error("unknown domain `{0}`")]
    UnknownDomain(String),
    #[error("invalid domain definition: {0}")]
    InvalidDomain(String),
    #[error("relevance knowledge has no entry for {agent}:{action}")]
    KnowledgeGap { agent: String, action: String },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("trace contains no samples")]
    EmptyTrace,
    #[error(
        "episodes start in {count} distinct abstract states; rebuild with a virtual initial state"
    )]
    MultipleInitialStates { count: usize },
    #[error("no goal state is reachable from the initial state ({explored} states explored)")]
    UnreachableGoal { explored: usize },
    #[error("unknown abstract state {0}")]
    UnknownState(String),
    #[error("version mismatch: {0}")]
    VersionMismatch(String),
    #[error("checksum failure: {0}")]
    Checksum(String),
    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },
    #[error("phrase map has no entry for {0}")]
    MissingPhrase(String),
    #[error(transparent)]
    Minimize(#[from] MinimizeError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn format(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Format {
            what,
            detail: detail.into(),
        }
    }
}
