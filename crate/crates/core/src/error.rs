use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("universe size {n} exceeds the exhaustive search budget of {max}")]
    UniverseTooLarge { n: u64, max: u64 },
    #[error("universe sizes differ ({0} vs {1})")]
    UniverseMismatch(u64, u64),
    #[error("coordinate {index} is outside [1, {n}]")]
    CoordinateOutOfRange { index: u64, n: u64 },
    #[error("set is not a member of the declared set system")]
    QueryNotInSystem,
    #[error("unknown set id {0}")]
    UnknownSetId(usize),
    #[error("stream length bound {0} exceeded")]
    StreamLengthExceeded(u64),
    #[error("coordinate {0} was already delivered")]
    DuplicateEntry(u64),
    #[error("zero value for coordinate {0} ignored")]
    ZeroValueIgnored(u64),
    #[error("negative update to coordinate {0} in an insertion-only sketch")]
    NegativeUpdate(u64),
    #[error("set system would contain {0} sets")]
    SystemTooLarge(u64),
    #[error("{sketch} sketches cannot read {model} streams: {reason}")]
    ModelMismatch { sketch: String, model: String, reason: String },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("unknown generator kind {0:?}")]
    UnknownKind(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("state file: {0}")]
    State(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
