use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("kernel returned a non-finite value at ({x}, {y})")]
    InvalidKernel { x: f64, y: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("operator is degenerate (largest s-value is {0})")]
    DegenerateOperator(f64),

    #[error("noise dominates the data: ||f_delta|| = {data_norm} <= C*delta = {threshold}")]
    NoiseDominatesData { data_norm: f64, threshold: f64 },

    #[error("no root: residual floor {floor} exceeds target {target}")]
    NoRoot { floor: f64, target: f64 },

    #[error("evaluation point {point} is within h = {step} of the boundary")]
    OutOfDomain { point: f64, step: f64 },

    #[error("step size mu = {mu} outside (0, {limit})")]
    InvalidStep { mu: f64, limit: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Short machine-readable tag, used for the report `status` column.
    pub fn status(&self) -> &'static str {
        match self {
            Error::NoRoot { .. } => "no-root",
            Error::NoiseDominatesData { .. } => "noise-dominates-data",
            Error::InvalidArgument(_) => "invalid-argument",
            Error::InvalidKernel { .. } => "invalid-kernel",
            Error::Numerical(_) => "numerical-error",
            Error::DegenerateOperator(_) => "degenerate-operator",
            Error::OutOfDomain { .. } => "out-of-domain",
            Error::InvalidStep { .. } => "invalid-step",
            Error::Config(_) => "config-error",
            Error::Io { .. } => "io-error",
        }
    }
}
