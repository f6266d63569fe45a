use std::path::PathBuf;

use crate::sparse::SparseCode;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{module}: invalid input: {message}")]
    InvalidInput {
        module: &'static str,
        message: String,
    },

    #[error("{module}: invalid parameter: {message}")]
    InvalidParameter {
        module: &'static str,
        message: String,
    },

    #[error("signal: trace too short ({len} samples, need at least {needed})")]
    TraceTooShort { len: usize, needed: usize },

    #[error("selection: class entropy is zero (fewer than two distinct classes)")]
    SingleClass,

    #[error("sparse: basis pursuit did not converge after {iterations} steps (duality gap {gap:e}, residual {residual:e})")]
    NotConverged {
        iterations: usize,
        gap: f64,
        residual: f64,
        last: Box<SparseCode>,
    },

    #[error("classifier: solver did not converge, result is low confidence (predicted {})", .0.predicted)]
    LowConfidence(Box<crate::classifier::ClassificationResult>),

    #[error("classifier: trace {trace_id} yields no windows after stop removal")]
    NoSignal { trace_id: String },

    #[error("io: {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("csv: {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub(crate) fn input(module: &'static str, message: impl Into<String>) -> Self {
        Error::InvalidInput {
            module,
            message: message.into(),
        }
    }

    pub(crate) fn param(module: &'static str, message: impl Into<String>) -> Self {
        Error::InvalidParameter {
            module,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }

    /// Short machine-readable category name.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput { .. } => "invalid_input",
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::TraceTooShort { .. } => "trace_too_short",
            Error::SingleClass => "single_class",
            Error::NotConverged { .. } => "not_converged",
            Error::LowConfidence(_) => "low_confidence",
            Error::NoSignal { .. } => "no_signal",
            Error::Io { .. } => "io",
            Error::Json { .. } => "json",
            Error::Csv { .. } => "csv",
        }
    }

    /// Process exit code: 2 usage/config, 3 data, 4 solver non-convergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter { .. } => 2,
            Error::NotConverged { .. } | Error::LowConfidence(_) => 4,
            _ => 3,
        }
    }
}
