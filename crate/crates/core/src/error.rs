use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is out of its documented range.
    #[error("configuration error: {0}")]
    Config(String),

    /// Initial data is singular at a node that carries a value.
    #[error("singular evaluation of `{expr}` at |x| = {radius}")]
    Singular { expr: String, radius: f64 },

    /// A barrier or closed-form profile was evaluated outside its domain.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("inverse iteration did not converge: residual {residual:e} after {iterations} iterations")]
    NonConvergence { iterations: usize, residual: f64 },

    /// Newton failed to reduce the residual below tolerance; the caller
    /// is expected to retry with a smaller step.
    #[error("Newton divergence at t = {t} with dt = {dt:e}: residual {residual:e}")]
    NewtonDivergence { t: f64, dt: f64, residual: f64 },

    #[error("time step underflow at t = {t}: dt fell below dt_min = {dt_min:e}")]
    StepUnderflow { t: f64, dt_min: f64 },

    #[error("singular linear system (zero pivot at row {0})")]
    SingularMatrix(usize),

    #[error("monotonicity violation in {axis} ladder between parameters {lower} and {upper}: worst margin {margin:e} at t = {t}")]
    MonotonicityViolation {
        axis: String,
        lower: f64,
        upper: f64,
        margin: f64,
        t: f64,
    },

    #[error("fingerprint mismatch in {path}: {detail}")]
    FingerprintMismatch { path: PathBuf, detail: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
