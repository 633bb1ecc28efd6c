use std::path::PathBuf;

/// Errors raised across the engine.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("one-particle index {position} out of range for layout width {width}")]
    PositionOutOfRange { position: usize, width: usize },
    #[error("determinant {determinant} is not part of space '{space}' (under-expanded space?)")]
    EscapingDeterminant { determinant: String, space: String },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("empty seed basis")]
    EmptySeed,
    #[error("invalid constraint: {0}")]
    InvalidConstraint(String),
    #[error("ligand reduction undefined: {0}")]
    LigandReduction(String),
    #[error("missing Slater integral {0}")]
    MissingIntegral(String),
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error("invalid transition operator: {0}")]
    Transition(String),
    #[error("unknown component '{0}'")]
    UnknownComponent(String),
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("unknown parameter '{0}'")]
    UnknownParameter(String),
    #[error("invalid parameter {name}: {message}")]
    InvalidParameter { name: String, message: String },
    #[error("zero seed vector")]
    ZeroSeed,
    #[error("Lanczos did not converge after {restarts} restarts (residuals {residuals:?})")]
    NotConverged { restarts: usize, residuals: Vec<f64> },
    #[error("shifted solver stopped after {iterations} iterations with relative residual {residual:e}")]
    SolverStalled { iterations: usize, residual: f64 },
    #[error("unknown experiment class '{0}'")]
    UnknownClass(String),
    #[error("case directory: {0}")]
    Case(String),
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse { path: path.into(), line, message: message.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
