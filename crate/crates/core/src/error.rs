use thiserror::Error;

use crate::ids::{PartId, ScrapId};

/// Everything an engine operation can reject.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("dimensions must be positive, got {0:?}")]
    NonPositiveDimension([f64; 3]),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unknown scrap #{0}")]
    UnknownScrap(ScrapId),
    #[error("unknown part {0}")]
    UnknownPart(PartId),
    #[error("part {0} has no cut-plan placement")]
    UnknownPlacement(PartId),
    #[error("part {0} is not assigned to a scrap")]
    UnassignedPart(PartId),
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("non-convex geometry: {0}")]
    NonConvex(String),
    #[error("resaw cut on part {0} is disabled")]
    ResawViolation(PartId),
    #[error("invalid edge: {0}")]
    InvalidEdge(String),
    #[error("parts are not congruent: {0} differs from {1}")]
    IncongruentParts(PartId, PartId),
    #[error("collision for part {0} unresolved after {1} iterations")]
    UnresolvedCollision(PartId, usize),
    #[error("no snap target for part {0}")]
    NoSnapTarget(PartId),
    #[error("degenerate scene triangle at index {0}")]
    DegenerateTriangle(usize),
    #[error("nothing to undo")]
    NothingToUndo,
    #[error("nothing to redo")]
    NothingToRedo,
    #[error("malformed command: {0}")]
    MalformedCommand(String),
    #[error("i/o failure: {0}")]
    IoFailure(String),
    #[error("document version {found} is newer than supported version {supported}")]
    VersionMismatch { found: u64, supported: u64 },
    #[error("schema violation: {0}")]
    SchemaViolation(String),
}

impl Error {
    /// Stable machine-readable name, used in events.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NonPositiveDimension(_) => "NonPositiveDimension",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::UnknownScrap(_) => "UnknownScrap",
            Error::UnknownPart(_) => "UnknownPart",
            Error::UnknownPlacement(_) => "UnknownPlacement",
            Error::UnassignedPart(_) => "UnassignedPart",
            Error::DegenerateGeometry(_) => "DegenerateGeometry",
            Error::NonConvex(_) => "NonConvex",
            Error::ResawViolation(_) => "ResawViolation",
            Error::InvalidEdge(_) => "InvalidEdge",
            Error::IncongruentParts(..) => "IncongruentParts",
            Error::UnresolvedCollision(..) => "UnresolvedCollision",
            Error::NoSnapTarget(_) => "NoSnapTarget",
            Error::DegenerateTriangle(_) => "DegenerateTriangle",
            Error::NothingToUndo => "NothingToUndo",
            Error::NothingToRedo => "NothingToRedo",
            Error::MalformedCommand(_) => "MalformedCommand",
            Error::IoFailure(_) => "IoFailure",
            Error::VersionMismatch { .. } => "VersionMismatch",
            Error::SchemaViolation(_) => "SchemaViolation",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::IoFailure(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
