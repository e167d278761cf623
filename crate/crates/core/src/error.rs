use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse failure class, used by the command-line front end to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Usage,
    Io,
    Parse,
    Numerical,
}

impl Category {
    pub fn name(self) -> &'static str {
        match self {
            Category::Usage => "usage",
            Category::Io => "io",
            Category::Parse => "parse",
            Category::Numerical => "numerical",
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("dataset has no rows")]
    EmptyDataset,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("variable `{0}` requested more than once")]
    DuplicateVariable(String),
    #[error("Sobol dimension {0} unsupported (1..={max})", max = crate::sobol::MAX_DIMENSION)]
    DimensionUnsupported(usize),
    #[error("expected {expected} columns, found {found}")]
    ColumnCountMismatch { expected: usize, found: usize },
    #[error("invalid range for `{name}`: lower {lower} must be below upper {upper}")]
    InvalidRange { name: String, lower: f64, upper: f64 },

    #[error("temperature {0} °C outside the supported [-40, 60] °C band")]
    TempOutOfRange(f64),
    #[error("nonphysical result: {0}")]
    NonphysicalResult(String),
    #[error("series of {len} samples is shorter than the {window}-sample window")]
    SeriesTooShort { len: usize, window: usize },
    #[error("fast, wave and yaw series do not overlap")]
    EmptyOverlap,

    #[error("air density is not populated")]
    MissingDensity,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("Cholesky factorization failed after jitter escalation")]
    CholeskyFailure,
    #[error("input column `{0}` is constant")]
    ConstantColumn(String),
    #[error("need at least {needed} rows, found {found}")]
    TooFewRows { needed: usize, found: usize },
    #[error("Jacobian is singular (parameter `{0}` has no influence on the residuals)")]
    SingularJacobian(String),

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("reference value {0} must be positive")]
    NonpositiveReference(f64),
    #[error("yaw {0}° outside [0, 90)")]
    YawOutOfRange(f64),
    #[error("rho_min {rho_min} must be positive and not above rho_max {rho_max}")]
    InvalidDensityOrder { rho_min: f64, rho_max: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub fn category(&self) -> Category {
        use Error::*;
        match self {
            Io { .. } => Category::Io,
            MissingColumn(_) | Parse { .. } | EmptyDataset | Json(_) => Category::Parse,
            CholeskyFailure | SingularJacobian(_) | NonphysicalResult(_) => Category::Numerical,
            _ => Category::Usage,
        }
    }
}
