use thiserror::Error;

/// Errors raised by space construction, geometric queries and experiments.
#[derive(Debug, Error)]
pub enum Error {
    #[error("presentation mismatch: {0}")]
    PresentationMismatch(String),

    #[error("unsupported peripheral: {0}")]
    UnsupportedPeripheral(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("budget exceeded: projected {projected} vertices, budget {budget}")]
    BudgetExceeded { projected: u64, budget: u64 },

    #[error("invalid horoball depth {0}")]
    InvalidDepth(u32),

    #[error("invalid metric: {0}")]
    InvalidMetric(String),

    #[error("truncation error: {0}")]
    Truncation(String),

    #[error("sampling starved: wanted {wanted}, achieved {achieved}")]
    SamplingStarved { wanted: usize, achieved: usize },

    #[error("undefined tuple: {0}")]
    UndefinedTuple(String),

    #[error("invalid proxy: {0}")]
    InvalidProxy(String),

    #[error("degenerate pair: {0}")]
    DegeneratePair(String),

    #[error("proxy cannot be extended: {0}")]
    Extension(String),

    #[error("unsupported map: {0}")]
    UnsupportedMap(String),

    #[error("peripheral correspondence: {0}")]
    Correspondence(String),

    #[error("image too short to reach the target sphere: {0}")]
    ShortImage(String),

    #[error("coverage gap at vertex {0}")]
    CoverageGap(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error("invariant violation: {0}")]
    InvariantViolation(String),

    #[error("kind mismatch: {0} vs {1}")]
    KindMismatch(String, String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse(_) | Error::Json(_) | Error::Csv(_) | Error::Io(_) => 2,
            Error::SamplingStarved { .. } => 3,
            Error::BudgetExceeded { .. } => 4,
            Error::InvariantViolation(_) => 5,
            Error::PresentationMismatch(_)
            | Error::UnsupportedPeripheral(_)
            | Error::UnsupportedMap(_)
            | Error::Correspondence(_) => 6,
            Error::KindMismatch(..) => 7,
            Error::CoverageGap(_) => 8,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
