use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{name} = {value} is outside its domain ({constraint})")]
    Domain {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },

    #[error("invalid range: {0}")]
    InvalidRange(String),

    #[error("series of length {n} exceeds the direct-summation limit of {max} samples")]
    LengthGuard { n: usize, max: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("wavelet parameters of the scalogram (beta={got_beta}, gamma={got_gamma}) do not match the element parameters (beta={want_beta}, gamma={want_gamma})")]
    ParameterMismatch {
        got_beta: f64,
        got_gamma: f64,
        want_beta: f64,
        want_gamma: f64,
    },

    #[error("ratio s/rho = {0} is inside the transition regime [0.1, 10]; no asymptotic branch applies")]
    Regime(f64),

    #[error("event time {time} lies outside [0, {n})")]
    EventOutOfRange { time: f64, n: usize },

    #[error("gap of {gap} time units at observation {index} exceeds the limit of {limit}")]
    GapTooLong { index: usize, gap: f64, limit: f64 },

    #[error("timestamps are not strictly increasing at observation {0}")]
    NonMonotone(usize),

    #[error("cutoff frequency {cutoff} is not below the Nyquist frequency {nyquist}")]
    CutoffAboveNyquist { cutoff: f64, nyquist: f64 },

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: String,
        line: u64,
        message: String,
    },

    #[error("series is empty")]
    EmptySeries,

    #[error("invalid configuration field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("manifest check failed: {0}")]
    Manifest(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn domain(name: &'static str, value: f64, constraint: &'static str) -> Self {
        Error::Domain {
            name,
            value,
            constraint,
        }
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input (files, flags, parameters)
    /// rather than by the runtime environment.
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::Stage { source, .. } => source.is_input_error(),
            Error::Io { .. } | Error::Manifest(_) => false,
            _ => true,
        }
    }

    /// Labels the error with the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
