use thiserror::Error;

#[derive(Debug, Error)]
pub enum LgnbError {
    /// An argument was outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Run configuration is inconsistent or incomplete.
    #[error("configuration error: {0}")]
    Config(String),

    /// Input data could not be ingested.
    #[error("ingestion error at {location}: {message}")]
    Ingestion { location: String, message: String },

    /// A computation produced a non-finite or otherwise impossible value.
    #[error("numerical fault: {0}")]
    NumericalFault(String),

    /// An estimator ran into the boundary of its parameter space or did not converge.
    #[error("did not converge: {0}")]
    NonConvergence(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl LgnbError {
    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            LgnbError::Config(_) | LgnbError::Domain(_) => 2,
            LgnbError::Ingestion { .. } | LgnbError::Io(_) => 3,
            LgnbError::NumericalFault(_) => 4,
            LgnbError::NonConvergence(_) => 5,
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        LgnbError::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        LgnbError::Config(msg.into())
    }

    pub(crate) fn fault(msg: impl Into<String>) -> Self {
        LgnbError::NumericalFault(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, LgnbError>;
