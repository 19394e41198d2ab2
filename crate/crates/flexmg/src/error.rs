use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid problem spec: {0}")]
    InvalidSpec(String),

    #[error("dimension mismatch in {op}: expected {expected}, got {found}")]
    DimensionMismatch {
        op: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid CSR structure: {0}")]
    InvalidCsr(String),

    #[error("singular matrix: zero pivot at column {0}")]
    SingularMatrix(usize),

    #[error("setup failed: {0}")]
    Setup(String),

    #[error("invalid cycle program: {0}")]
    InvalidProgram(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code class: 2 for config/parse problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::SingularMatrix(_) | Error::Setup(_) | Error::Numerical(_) => 3,
            _ => 2,
        }
    }
}
