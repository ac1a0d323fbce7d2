use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A time or point is not representable on the grid that is currently sampled.
    #[error("grid resolution: {0}")]
    GridResolution(String),

    /// Drift exponents fail one of the standing hypotheses; `inequality` names it.
    #[error("hypothesis violation: {inequality} fails ({detail})")]
    HypothesisViolation {
        inequality: &'static str,
        detail: String,
    },

    #[error("unsupported dimension {0}: operation is defined for d = 1 only")]
    UnsupportedDimension(usize),

    #[error("incomplete field: no value at grid index {0}")]
    IncompleteField(usize),

    #[error("start-set budget violated at level {level}: |S_n| = {size} > 2^(eta n) = {bound}")]
    BudgetViolation { level: u32, size: usize, bound: f64 },

    #[error("format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }
}
