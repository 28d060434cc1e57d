use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("mesh parameter must be at least 1")]
    ZeroMesh,
    #[error("grid must be at least {min}x{min}, got {nx}x{ny}")]
    GridTooSmall { nx: usize, ny: usize, min: usize },
    #[error("root vertex ({0}, {1}) lies outside the grid")]
    RootOutsideGrid(usize, usize),
    #[error("linear system is singular (pivot {pivot})")]
    Singular { pivot: usize },
    #[error("field length {got} does not match lattice size {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("vertex set intersects the boundary at vertex {0}")]
    SetTouchesBoundary(usize),
    #[error("field is nonzero on boundary vertex {0}")]
    BoundaryViolation(usize),
    #[error("instance too large: {0}")]
    TooLarge(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("level line cannot continue at dual vertex ({0}, {1})")]
    StuckTrace(f64, f64),
    #[error("level line anchor is degenerate: {0}")]
    DegenerateAnchor(String),
}
