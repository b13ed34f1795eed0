use thiserror::Error;

/// Errors surfaced by the library.
///
/// The variants map onto the CLI exit-code contract: configuration errors
/// are usage problems, format errors come from malformed input files, and
/// numerical errors mean the computation itself broke down.
#[derive(Debug, Error)]
pub enum DcmError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("numerical error at examinee {examinee}: {message}")]
    Numerical { examinee: usize, message: String },

    #[error("numerical error: {0}")]
    Linalg(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl DcmError {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        DcmError::Config(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        DcmError::Format(msg.into())
    }

    pub(crate) fn numerical(examinee: usize, msg: impl Into<String>) -> Self {
        DcmError::Numerical {
            examinee,
            message: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, DcmError>;
