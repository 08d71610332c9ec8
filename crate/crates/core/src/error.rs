use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the library can report.
///
/// [`Error::reason`] gives a stable machine-readable code for each variant;
/// the CLI prints it verbatim and derives its exit status from
/// [`Error::is_numerical`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix contains NaN or infinite entries")]
    NonFinite,
    #[error("eigensolver did not converge within {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("argument outside the domain: {0}")]
    DomainError(String),
    #[error("root bracket does not straddle zero: {0}")]
    BracketFailure(String),
    #[error("radius {epsilon} is not below the maximal radius {max}")]
    RadiusTooLarge { epsilon: f64, max: f64 },
    #[error("radius {0} must be strictly positive")]
    RadiusNonPositive(f64),
    #[error("nominal matrix has a zero eigenvalue but the divergence needs a positive definite nominal")]
    SingularNominal,
    #[error("nominal matrix has no positive eigenvalue")]
    ZeroNominal,
    #[error("matrix is not positive semidefinite (eigenvalue {0})")]
    NotPsd(f64),
    #[error("matrix is not symmetric (asymmetry {0})")]
    NotSymmetric(f64),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("mixing weight {0} outside [0, 1]")]
    BadAlpha(f64),
    #[error("confidence level {0} outside (0, 1)")]
    BadConfidence(f64),
    #[error("candidate grid is empty")]
    EmptyGrid,
    #[error("estimator is singular (smallest eigenvalue {0})")]
    SingularEstimator(f64),
    #[error("insufficient history: need {needed} rows, have {have}")]
    InsufficientHistory { needed: usize, have: usize },
    #[error("degenerate class {label}: {detail}")]
    DegenerateClass { label: i64, detail: String },
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("malformed input at row {row}, column {column}: {detail}")]
    MalformedInput {
        row: usize,
        column: usize,
        detail: String,
    },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unknown divergence '{0}'")]
    UnknownDivergence(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn reason(&self) -> &'static str {
        match self {
            Error::NonFinite => "NonFinite",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::DomainError(_) => "DomainError",
            Error::BracketFailure(_) => "BracketFailure",
            Error::RadiusTooLarge { .. } => "RadiusTooLarge",
            Error::RadiusNonPositive(_) => "RadiusNonPositive",
            Error::SingularNominal => "SingularNominal",
            Error::ZeroNominal => "ZeroNominal",
            Error::NotPsd(_) => "NotPsd",
            Error::NotSymmetric(_) => "NotSymmetric",
            Error::InsufficientData(_) => "InsufficientData",
            Error::BadAlpha(_) => "BadAlpha",
            Error::BadConfidence(_) => "BadConfidence",
            Error::EmptyGrid => "EmptyGrid",
            Error::SingularEstimator(_) => "SingularEstimator",
            Error::InsufficientHistory { .. } => "InsufficientHistory",
            Error::DegenerateClass { .. } => "DegenerateClass",
            Error::MalformedHeader(_) => "MalformedHeader",
            Error::MalformedInput { .. } => "MalformedInput",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::UnknownDivergence(_) => "UnknownDivergence",
            Error::Io(_) => "Io",
            Error::Csv(_) => "Csv",
            Error::Json(_) => "Json",
        }
    }

    /// Failures of the numerics themselves, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence { .. } | Error::BracketFailure(_)
        )
    }
}
