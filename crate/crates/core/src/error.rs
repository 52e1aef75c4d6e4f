use thiserror::Error;

/// Errors raised anywhere in the design loop.
#[derive(Debug, Error)]
pub enum BoedError {
    /// A caller violated a precondition (dimension mismatch, empty input, bad parameter).
    #[error("usage error: {0}")]
    Usage(String),

    /// A linear-algebra or floating point failure.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Every particle received zero likelihood.
    #[error("degenerate posterior: {0}")]
    DegeneratePosterior(String),

    /// Monte Carlo EIG estimate was not finite.
    #[error("EIG estimation failed: {0}")]
    Estimation(String),

    /// Proxy training produced a non-finite loss.
    #[error("proxy training failed: {0}")]
    Training(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = BoedError> = std::result::Result<T, E>;

pub(crate) fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(BoedError::Usage(msg.into()))
}
