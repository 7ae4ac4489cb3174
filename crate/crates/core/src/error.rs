use crate::mesh::BoundaryTag;

/// Errors raised anywhere in the toolkit.
#[derive(thiserror::Error, Debug)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("inverted element in cell {cell} (det = {det:e})")]
    InvertedElement { cell: usize, det: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("boundary tag {0:?} does not occur in the mesh")]
    UnknownTag(BoundaryTag),

    #[error("incompatible spaces: {0}")]
    IncompatibleSpaces(String),

    #[error("linear solve failed: {msg} (relative residual {residual:e})")]
    Solver { msg: String, residual: f64 },

    #[error("missing adjoint state for {0}")]
    MissingAdjoint(&'static str),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
