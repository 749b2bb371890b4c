use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("photon cutoff {requested} exceeds the supported maximum {max}")]
    CutoffExceeded { requested: usize, max: usize },

    #[error("all amplitudes are zero; the state cannot be normalized")]
    AllZeroAmplitudes,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("distance {x} km lies outside the profile domain [0, {max}] km")]
    OutOfDomain { x: f64, max: f64 },

    #[error("invalid medium profile: {0}")]
    InvalidProfile(String),

    #[error("loss fraction {0} must lie strictly between 0 and 1")]
    InvalidLossFraction(f64),

    #[error("invalid splitter chain: {0}")]
    InvalidChain(String),

    #[error("hermitian eigensolver did not converge on a {dim}x{dim} matrix{context}")]
    EigensolverFailure { dim: usize, context: String },

    #[error("index {index} out of range for ensemble of {count} states")]
    IndexOutOfRange { index: usize, count: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerical machinery rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::EigensolverFailure { .. })
    }

    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_))
    }

    pub(crate) fn with_context(self, context: impl Into<String>) -> Self {
        match self {
            Error::EigensolverFailure { dim, context: old } => Error::EigensolverFailure {
                dim,
                context: format!("{old} ({})", context.into()),
            },
            other => other,
        }
    }
}
