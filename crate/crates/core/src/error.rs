use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("excitation cutoff {0} is below 2; the two-excitation sector is required for g2")]
    Cutoff(usize),

    #[error("singular linear system while solving {0}")]
    Singular(&'static str),

    #[error("cannot condition on a detection: the steady-state field amplitude is zero")]
    NoField,

    #[error("integration failed at t = {t_ns} ns: {reason}")]
    Integration { t_ns: f64, reason: String },

    #[error("target g2(0) = {target} is not attainable; reachable range is [{min}, {max}]")]
    InfeasibleTarget { target: f64, min: f64, max: f64 },

    #[error("no capture point: {0}")]
    NoCapture(String),

    #[error("feedback protocol: {0}")]
    Protocol(String),

    #[error("drive configuration: {0}")]
    Drive(String),

    #[error("{}:{line}: {reason}", path.display())]
    ShapeParse {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("steady state is not unique: {0}")]
    Degenerate(String),

    #[error("normalization: {0}")]
    Normalization(String),

    #[error("trajectory configuration: {0}")]
    Trajectory(String),

    #[error("histogram: {0}")]
    Histogram(String),

    #[error("fit: {0}")]
    Fit(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Error {
    Error::Parameter {
        name,
        reason: reason.into(),
    }
}
