use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    /// Bad parameters: out-of-range points, unknown options, horizons exceeded.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("syntax error at offset {pos}: {msg}")]
    Syntax { pos: usize, msg: String },

    #[error("unknown agent `{0}`")]
    UnknownAgent(String),

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("variable `{0}` is quotiented out of the reduced engine; rerun with --engine naive")]
    ElidedVariable(String),

    #[error("read of unassigned history variable `{var}` at time {time}")]
    UnassignedHistory { var: String, time: usize },

    #[error("scenario admits no initial state")]
    Unsatisfiable,

    #[error(
        "program contains knowledge statements; plug in concrete predicates or use execute_kbp"
    )]
    KnowledgeInProgram,

    #[error("formula is not local to agent {agent}: {msg}")]
    NotLocal { agent: String, msg: String },

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn model(msg: impl Into<String>) -> Self {
        Error::Model(msg.into())
    }

    pub(crate) fn syntax(pos: usize, msg: impl Into<String>) -> Self {
        Error::Syntax {
            pos,
            msg: msg.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
