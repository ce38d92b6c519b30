use thiserror::Error;

use crate::turnbull::TurnbullCurve;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid observation: {0}")]
    InvalidObservation(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("transform removed every observation (all were left- or right-censored)")]
    EmptyTransform,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-identifiable dataset: {0}")]
    NonIdentifiable(String),

    #[error("degenerate dataset: {0}")]
    Degenerate(String),

    #[error("optimizer diverged: {0}")]
    Divergence(String),

    #[error("method `{method}` is not applicable: {reason}")]
    MethodNotApplicable { method: &'static str, reason: String },

    #[error("Turnbull EM did not converge after {iterations} iterations")]
    TurnbullNonConvergence {
        iterations: usize,
        last: Box<TurnbullCurve>,
    },

    #[error("degenerate bootstrap: {0}")]
    DegenerateBootstrap(String),

    #[error("HC level {0}% was not tracked by the bootstrap")]
    NotTracked(f64),

    #[error("bootstrap failed: {0}")]
    Bootstrap(String),

    #[error("time budget exhausted before the first bootstrap batch completed")]
    TimeBudgetExhausted,

    #[error("every requested fit failed: {0}")]
    NoFits(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors raised while reading or validating input data.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. } | Error::InvalidObservation(_) | Error::EmptyDataset
        )
    }
}
