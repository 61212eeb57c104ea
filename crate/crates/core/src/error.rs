use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Malformed or out-of-range input value.
    #[error("invalid input: {0}")]
    Input(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    /// The full 2^N engine refuses chains above its configured size cap.
    #[error(
        "full engine is capped at {cap} spins (requested {n}); use the reduced \
         single-excitation engine for larger networks"
    )]
    Resource { n: usize, cap: usize },

    #[error("correlation kernel is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NumericalPsd { min_eigenvalue: f64 },

    #[error(
        "integration diverged at t = {t}: {reason}; retry with a smaller time step \
         (current dt = {dt})"
    )]
    Diverged { t: f64, dt: f64, reason: String },

    /// A closed-form prediction was requested outside the regime where it holds.
    #[error("contract violated: {0}")]
    Contract(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("no sample within dt/2 of t = {requested}")]
    SamplingGrid { requested: f64 },

    /// The excitation profile has no half-maximum crossing. `sites` is the
    /// fallback width, half the chain length.
    #[error("packet width undefined for a flat profile (fallback {sites} sites)")]
    UndefinedWidth { sites: f64 },

    #[error("step extraction failed: {0}")]
    Extraction(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
