use thiserror::Error;

pub type Result<T> = std::result::Result<T, HopfieldError>;

#[derive(Debug, Error)]
pub enum HopfieldError {
    #[error("empty input")]
    EmptyInput,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("degenerate point: {0}")]
    DegeneratePoint(String),

    /// A property that holds by construction was observed to fail.
    #[error("internal consistency violated: {0}")]
    InternalConsistency(String),

    #[error("precondition violated: query is outside S_{mu} (nearest sphere: {nearest:?})")]
    PreconditionViolated { mu: usize, nearest: Option<usize> },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("infeasible bound: {0}")]
    InfeasibleBound(String),

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("parse error at row {row}, column {col}: {msg}")]
    Parse { row: usize, col: usize, msg: String },

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl HopfieldError {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            HopfieldError::InfeasibleBound(_) => 3,
            HopfieldError::InternalConsistency(_) | HopfieldError::NoConvergence(_) => 1,
            _ => 2,
        }
    }
}

pub(crate) fn shape_err(what: &str, expected: usize, got: usize) -> HopfieldError {
    HopfieldError::Shape(format!("{what}: expected {expected}, got {got}"))
}
