//! Error type shared by every module, with process exit codes for the CLI.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not Hermitian: defect {defect:.3e} exceeds tolerance {tol:.3e}")]
    NonHermitian { defect: f64, tol: f64 },

    #[error("matrix is not positive semidefinite: eigenvalue {lambda_min:.6e} below clamp band {band:.3e}")]
    NotPsd { lambda_min: f64, band: f64 },

    #[error("alphabet mismatch: {0}")]
    AlphabetMismatch(String),

    #[error("invalid letter {letter} for alphabet size {d}")]
    InvalidLetter { letter: usize, d: usize },

    #[error("capacity exceeded: {what} needs {required}, limit is {limit}")]
    CapacityExceeded {
        what: &'static str,
        required: u128,
        limit: usize,
    },

    #[error("depth {requested} exceeds available depth {available}")]
    DepthExceeded { requested: usize, available: usize },

    #[error("syntax error at byte {position}: expected {expected}")]
    Syntax { position: usize, expected: String },

    #[error("generator Z{index} out of range for alphabet size {d} (at byte {position})")]
    GeneratorOutOfRange {
        index: usize,
        d: usize,
        position: usize,
    },

    #[error("empty polynomial input")]
    EmptyInput,

    #[error("validation: {0}")]
    Validation(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error("kernel is not dominated by its shift: margin {margin:.6e}")]
    NotDominated { margin: f64 },

    #[error("shift construction is ill-conditioned: defining-relation residual {residual:.3e}")]
    IllConditioned { residual: f64 },

    #[error("dilation defect is not contractive: eigenvalue {lambda_min:.6e} of I - T*T")]
    NotContractive { lambda_min: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// CLI exit code: 2 = a mathematical check failed, 3 = bad input,
    /// 4 = a desk-scale capacity limit was hit.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::NotPsd { .. }
            | Error::NotDominated { .. }
            | Error::IllConditioned { .. }
            | Error::NotContractive { .. }
            | Error::NonHermitian { .. } => 2,
            Error::CapacityExceeded { .. } => 4,
            _ => 3,
        }
    }
}
