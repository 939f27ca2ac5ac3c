use thiserror::Error;

/// Errors raised by mesh construction, local operators and the solver.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("mesh parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("non-manifold face between vertices {0} and {1}: shared by more than two cells")]
    NonManifoldFace(usize, usize),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("singular local system in cell {cell}: {what}")]
    SingularLocalSystem { cell: usize, what: &'static str },

    #[error("linear solver failure: {0}")]
    LinearSolver(String),

    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
