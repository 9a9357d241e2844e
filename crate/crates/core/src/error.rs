use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the kernel, solvers, simulators and harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid time ordering: need {0}")]
    InvalidTimes(String),

    #[error("accumulated covariance over [{s}, {t}] is not positive definite")]
    NotPositiveDefinite { s: f64, t: f64 },

    #[error("diffusion is not uniformly elliptic (smallest eigenvalue {0:e})")]
    NotElliptic(f64),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grids differ: {0}")]
    GridMismatch(String),

    #[error("unknown preset `{0}` (expected heat, exponential_growth, burgers or logistic_fkpp)")]
    UnknownPreset(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "Picard iteration on slab {slab} did not converge after {iterations} iterations \
         (last residual {residual:e}, tol {tol:e})"
    )]
    NonConvergence {
        slab: usize,
        iterations: usize,
        residual: f64,
        tol: f64,
        history: Vec<f64>,
    },

    #[error("particle step {dt} is incompatible with field time spacing {field_dt}")]
    IncompatibleTimeStep { dt: f64, field_dt: f64 },

    #[error("time {0} is not a recorded level")]
    MissingLevel(f64),

    #[error("explicit step {dt:e} violates the stability limit {limit:e}")]
    CflViolation { dt: f64, limit: f64 },

    #[error("denominator underflow in representation formula at x = {0}")]
    Underflow(f64),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
