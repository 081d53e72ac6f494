use thiserror::Error;

/// Errors raised by the estimation pipeline.
#[derive(Debug, Error)]
pub enum DvcmError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error(
        "empty kernel window: no domain within h={h} of u0={u0}; nearest source domain is at distance {nearest}"
    )]
    EmptyWindow { u0: f64, h: f64, nearest: f64 },

    #[error("singular system in {context} (condition estimate {condition:.3e})")]
    Singular { context: String, condition: f64 },

    #[error("degenerate variance: {0}")]
    DegenerateVariance(String),

    #[error("degenerate scale: {0}")]
    DegenerateScale(String),

    #[error("schema error: missing column `{0}`")]
    Schema(String),

    #[error("parse error at row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("experiment failed: {failed} of {total} replications failed ({first_error})")]
    Experiment {
        failed: usize,
        total: usize,
        first_error: String,
    },

    #[error("did not converge after {iterations} iterations (gradient max-norm {gradient:.3e})")]
    NotConverged { iterations: usize, gradient: f64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = DvcmError> = std::result::Result<T, E>;

impl DvcmError {
    pub(crate) fn singular(context: impl Into<String>, condition: f64) -> Self {
        DvcmError::Singular {
            context: context.into(),
            condition,
        }
    }

    pub(crate) fn argument(msg: impl Into<String>) -> Self {
        DvcmError::Argument(msg.into())
    }
}
