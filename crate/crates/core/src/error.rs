use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown loss `{name}`; valid names: {valid}")]
    UnknownLoss { name: String, valid: String },

    #[error("ratio not recoverable: loss `{0}` has a limiting transform, so the likelihood ratio cannot be recovered from the discriminator output")]
    RatioNotRecoverable(String),

    #[error("transform is not strictly increasing: {0}")]
    NotMonotone(String),

    #[error("weight function must be positive: {0}")]
    NonPositiveWeight(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-canonical range {0}")]
    NonCanonicalRange(String),

    #[error("missing closed form: {0}")]
    MissingClosedForm(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite gradient in layer {layer}")]
    NonFiniteGradient { layer: usize },

    #[error("exact penalty pass needs a twice-differentiable activation; use smooth-leaky or the finite-difference mode")]
    RectifierInExactMode,

    #[error("empty dataset")]
    EmptyDataset,

    #[error("line {line}: expected {expected} fields, found {found}")]
    RaggedRow {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("line {line}: field `{field}` is not a number")]
    NonNumericField { line: usize, field: String },

    #[error("undefined likelihood ratio: reference density is zero at the probe point")]
    UndefinedRatio,

    #[error("density keeps only {0:.4} of its mass inside the window")]
    InsufficientMass(f64),

    #[error("ideal solver requires invertible ω (loss `{0}`)")]
    RequiresInvertible(String),

    #[error("solver diverged after {iterations} iterations")]
    Diverged {
        iterations: usize,
        trace: Vec<crate::ideal_solver::TraceRecord>,
    },

    #[error("training aborted at generator iteration {iteration}: {reason}")]
    TrainingAborted {
        iteration: usize,
        reason: String,
        last_good: Box<crate::trainer::TrainOutcome>,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
