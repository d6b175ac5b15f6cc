use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("{method} did not converge after {iterations} iterations (last residual {last:.3e})", last = residual_history.last().copied().unwrap_or(f64::NAN))]
    SolverFailure {
        method: String,
        iterations: usize,
        residual_history: Vec<f64>,
    },

    #[error("optimizer failure: {message}")]
    OptimizerFailure { message: String, trace: Vec<f64> },

    #[error("invariant `{name}` violated: {detail}")]
    Invariant { name: String, detail: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
