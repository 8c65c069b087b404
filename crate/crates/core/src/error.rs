use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the simulation and audit pipelines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter {value} outside {what} ({lower}, {upper})")]
    Domain {
        what: &'static str,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("numeric failure in {context}: {detail}")]
    Numeric { context: &'static str, detail: String },

    #[error("zero density at x={x}, theta={theta}: likelihood ratio undefined")]
    Singularity { x: f64, theta: f64 },

    #[error("outcome space of {outcomes} points exceeds capacity {capacity}")]
    Capacity { outcomes: u128, capacity: u128 },

    #[error("truncation constant c1={c1} too small (p={p} > 1/2); use c1 >= {suggested}")]
    TruncationConstant { c1: f64, p: f64, suggested: f64 },

    #[error("parse error{}: {message}", location.as_ref().map(|l| format!(" at {l}")).unwrap_or_default())]
    Parse {
        location: Option<String>,
        message: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn numeric(context: &'static str, detail: impl Into<String>) -> Self {
        Error::Numeric {
            context,
            detail: detail.into(),
        }
    }

    pub(crate) fn parse(location: Option<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
