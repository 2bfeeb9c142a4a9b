use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Kendall's tau-b denominator is zero (one variable is all-tied).
    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("corpus error: {0}")]
    Corpus(String),

    #[error("degenerate profile: {0}")]
    DegenerateProfile(String),

    /// The requested operation cannot be applied to this itinerary/pool.
    #[error("infeasible {op}: {reason}")]
    Feasibility { op: String, reason: String },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("structural violation: {0}")]
    Structural(String),

    #[error("template for {template} cannot render a {requested} request")]
    TemplateMismatch { template: String, requested: String },

    #[error("aggregation error: {0}")]
    Aggregation(String),

    #[error("transport error: {0}")]
    Transport(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable kind, used by the CLI's JSON error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::UndefinedCorrelation(_) => "undefined_correlation",
            Error::Schema(_) => "schema",
            Error::Corpus(_) => "corpus",
            Error::DegenerateProfile(_) => "degenerate_profile",
            Error::Feasibility { .. } => "feasibility",
            Error::Parameter(_) => "parameter",
            Error::Structural(_) => "structural",
            Error::TemplateMismatch { .. } => "template_mismatch",
            Error::Aggregation(_) => "aggregation",
            Error::Transport(_) => "transport",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
