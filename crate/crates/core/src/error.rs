use std::io;

/// Errors raised anywhere in the tagging, inference and analysis path.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("frequency {frequency} Hz is not aligned to the {delta_f} Hz bin grid")]
    Alignment { frequency: f64, delta_f: f64 },

    #[error("model load error at node `{node}`: {reason}")]
    Load { node: String, reason: String },

    #[error("non-finite value produced by node `{node}`")]
    Numeric { node: String },

    #[error("bin {bin}: only {valid} valid baseline bins (need at least 2)")]
    InvalidBaseline { bin: usize, valid: usize },

    #[error("model fingerprint mismatch: report was produced for {expected}, model is {found}")]
    FingerprintMismatch { expected: String, found: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable short tag used in machine-readable diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Argument(_) => "argument",
            Error::Format(_) => "format",
            Error::Alignment { .. } => "alignment",
            Error::Load { .. } => "load",
            Error::Numeric { .. } => "numeric",
            Error::InvalidBaseline { .. } => "invalid_baseline",
            Error::FingerprintMismatch { .. } => "fingerprint_mismatch",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }

    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    pub(crate) fn load(node: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Load {
            node: node.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
