use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the reconstruction toolkit.
#[derive(Debug, Error)]
pub enum DotError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("linear solver failed at pivot {pivot}: {detail}")]
    SolverFailure { pivot: usize, detail: String },

    #[error("kernel singularity: {0}")]
    Singularity(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("divergence in {stage} at iteration/epoch {iteration}")]
    Divergence { stage: String, iteration: usize },

    #[error("missing prerequisite {path}: run `{step}` first")]
    MissingPrerequisite { path: PathBuf, step: String },

    #[error("parse error in {context}: {detail}")]
    Parse { context: String, detail: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, DotError>;

impl DotError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        DotError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(context: impl Into<String>, detail: impl ToString) -> Self {
        DotError::Parse {
            context: context.into(),
            detail: detail.to_string(),
        }
    }

    /// Process exit code for this error class: 2 invalid config, 3 numeric
    /// failure, 4 missing prerequisite, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            DotError::InvalidArgument(_) | DotError::Parse { .. } => 2,
            DotError::SolverFailure { .. }
            | DotError::Singularity(_)
            | DotError::Domain(_)
            | DotError::Numeric(_)
            | DotError::Divergence { .. } => 3,
            DotError::MissingPrerequisite { .. } => 4,
            DotError::Geometry(_) | DotError::Io { .. } => 1,
        }
    }
}
