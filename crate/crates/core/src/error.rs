use thiserror::Error;

/// Errors surfaced by the library. Usage errors are caller mistakes; query
/// errors are asking for something the current state cannot answer.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid box side {0}")]
    InvalidSide(f64),
    #[error("coordinate {coord} is too large for box side {side}")]
    CoordinateOverflow { coord: f64, side: f64 },
    #[error("non-finite coordinate in point {0}")]
    NonFinite(u64),
    #[error("duplicate id {0}")]
    DuplicateId(u64),
    #[error("unknown id {0}")]
    UnknownId(u64),
    #[error("points {0} and {1} have identical coordinates")]
    DuplicateCoordinates(u64, u64),
    #[error("need at least {need} points, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error("stale update for owner {owner}: stored key differs from the given old key")]
    StaleKey { owner: u64 },
    #[error("owner {0} appears in both the increase and the decrease set")]
    MixedUpdate(u64),
    #[error("heap is empty")]
    EmptyHeap,
    #[error("point {id} is not in the sparse set of level {level}")]
    NotSparse { id: u64, level: usize },
    #[error("negative radius {0}")]
    NegativeRadius(f64),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("i/o: {0}")]
    Io(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
