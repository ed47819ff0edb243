use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Conduction windows of the two push-pull sides would overlap.
    #[error("duty_high ({duty_high}) + duty_low ({duty_low}) < 1: conduction windows overlap")]
    Overlap { duty_high: f64, duty_low: f64 },

    #[error("invalid {what}: {reason}")]
    InvalidModel { what: &'static str, reason: String },

    #[error("newton iteration diverged after {iterations} iterations (last residual norm {last_norm:.3e})")]
    NewtonDivergence { iterations: usize, last_norm: f64 },

    #[error("step size underflow at t = {t:.6e} s (dt = {dt:.3e} s, error ratio {error_ratio:.3e})")]
    StepUnderflow { t: f64, dt: f64, error_ratio: f64 },

    #[error("no periodic steady state after {periods} periods (last residual {residual:.3e})")]
    NoSteadyState { periods: usize, residual: f64 },

    #[error("singular capacitance matrix (det = {det:.3e})")]
    SingularCapacitance { det: f64 },

    #[error("trace does not contain a complete cycle of `{signal}`")]
    IncompleteCycle { signal: String },

    #[error("traces do not share a common time span")]
    GridMismatch,

    #[error("unknown signal `{0}` in trace")]
    UnknownSignal(String),

    #[error("{path}:{line}: {reason}")]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("invalid value for `{key}`: {reason}")]
    Validation { key: String, reason: String },

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("`{0}` does not address a numeric scenario field")]
    BadParamPath(String),

    #[error("nothing to plot")]
    EmptyData,

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("io error on {path}: {message}")]
    Io { path: PathBuf, message: String },
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping any context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, err: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            message: err.to_string(),
        }
    }

    pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidModel {
            what,
            reason: reason.into(),
        }
    }
}
