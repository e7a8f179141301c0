use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    /// Unreadable or malformed input: config, manifest, graph file.
    #[error("config error: {0}")]
    Config(String),
    #[error("numeric failure: {0}")]
    Numeric(merw::Error),
    #[error("determinism failure: {0}")]
    Determinism(String),
    #[error("cannot compare {0} with {1}")]
    KindMismatch(String, String),
}

impl LabError {
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Config(_) | LabError::KindMismatch(..) => 2,
            LabError::Numeric(_) => 3,
            LabError::Determinism(_) => 4,
        }
    }
}

impl From<merw::Error> for LabError {
    fn from(e: merw::Error) -> Self {
        match e {
            merw::Error::Parse { .. } | merw::Error::Io(_) | merw::Error::InvalidParameter(_) => LabError::Config(e.to_string()),
            other => LabError::Numeric(other),
        }
    }
}

impl From<std::io::Error> for LabError {
    fn from(e: std::io::Error) -> Self {
        LabError::Config(e.to_string())
    }
}

pub type LabResult<T> = Result<T, LabError>;
