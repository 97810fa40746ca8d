use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("derivative order {requested} exceeds the configured cap {cap}")]
    OrderExceeded { requested: usize, cap: usize },

    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error("symbol is not 2π-periodic in x: {0}")]
    NonPeriodic(String),

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("frequency cutoff too small: need 2^(J+1) = {need} <= K = {cutoff}")]
    CutoffTooSmall { need: usize, cutoff: usize },

    #[error("spectral gap {gap:.3e} at the argmax is below {tol:.1e}; Jordan-like leading eigenvalues are not supported")]
    SpectralGap { gap: f64, tol: f64 },

    #[error("epsilon guard failed: {0}")]
    Guard(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("degenerate sweep: {0}")]
    DegenerateSweep(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid config:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error("container format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
