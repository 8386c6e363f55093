use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid bipartition {d1}x{d2}: both factors must be at least 2")]
    InvalidBipartition { d1: usize, d2: usize },

    #[error("matrix is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("state is not normalized (squared norm {norm_sq})")]
    NotNormalized { norm_sq: f64 },

    #[error("not a density matrix: {0}")]
    NotDensityMatrix(String),

    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    #[error("too many states: {got} given, at most {max} supported")]
    TooManyStates { got: usize, max: usize },

    #[error("operation requires pure states")]
    RequiresPureStates,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("polynomial matrix is not symmetric at ({row}, {col})")]
    AsymmetricPolyMatrix { row: usize, col: usize },

    #[error("objective degree {objective} exceeds twice the largest moment-basis degree {basis}")]
    DegreeViolation { objective: u32, basis: u32 },

    #[error("invalid relaxation config: {0}")]
    InvalidConfig(String),

    #[error("problem exceeds the internal solver budget ({0}); use export mode")]
    BudgetExceeded(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("unknown state set label `{0}`")]
    UnknownLabel(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
