use thiserror::Error;

/// Errors raised across the simulation and analysis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// An input lies outside the validity window of a model.
    #[error("domain error: {quantity} = {value} outside [{min}, {max}]")]
    Domain {
        quantity: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("no phase match for grating {grating} in [{lo_nm} nm, {hi_nm} nm]")]
    NoPhaseMatch { grating: usize, lo_nm: f64, hi_nm: f64 },

    #[error("half-maximum search failed: {0}")]
    Search(String),

    #[error("fit failed: {reason}")]
    Fit { reason: String, residual_norm: Option<f64> },

    /// The likelihood optimizer stopped improving before convergence.
    #[error("optimizer stagnated after {iterations} iterations (gradient norm {gradient_norm:e})")]
    Stagnation {
        iterations: usize,
        gradient_norm: f64,
        best: Box<crate::tomography::DensityMatrix>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }
}
