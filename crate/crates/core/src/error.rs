use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("payload length mismatch: expected {expected} bytes, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("degenerate tetrahedron (volume {0:e})")]
    DegenerateTet(f64),

    #[error("point ({x:.3}, {y:.3}, {z:.3}) lies outside the mesh hull")]
    OutsideHull { x: f64, y: f64, z: f64 },

    #[error("mesh has {0} folded tetrahedra")]
    Folded(usize),

    #[error("point {0} is not covered by any edge")]
    IsolatedPoint(usize),

    #[error("insufficient candidates: requested {requested}, available {available}")]
    InsufficientCandidates { requested: usize, available: usize },

    #[error("coplanar input: all points lie in one plane")]
    Coplanar,

    #[error("point does not dominate the reference point")]
    ReferencePoint,

    #[error("config error: {0}")]
    Config(String),

    #[error("config line {line}: {reason}")]
    ConfigSyntax { line: usize, reason: String },

    #[error("duplicate config key `{0}`")]
    DuplicateKey(String),

    #[error("config key `{key}` expects {expected}, found {found}")]
    TypeMismatch {
        key: String,
        expected: &'static str,
        found: String,
    },

    #[error("missing required config key `{0}`")]
    MissingKey(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("slice index {index} out of range for axis of length {len}")]
    SliceOutOfRange { index: usize, len: usize },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
