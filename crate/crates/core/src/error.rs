use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("R = {r} bohr is outside the curve domain [{min}, {max}]")]
    Domain { r: f64, min: f64, max: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}:{line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("numerical error at step {step} (t = {time_ps} ps): {message}")]
    StepFailure {
        step: usize,
        time_ps: f64,
        message: String,
    },

    #[error("spectral window violated: {0}")]
    SpectralBound(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("lookup error: {0}")]
    Lookup(String),

    #[error("ensemble coverage error, missing members: {0:?}")]
    Coverage(Vec<(u32, u32)>),

    #[error("undefined mean: {0}")]
    UndefinedMean(String),

    #[error("archive error: {0}")]
    Archive(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
