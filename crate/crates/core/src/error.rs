use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violated its declared range.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// A dynamics term evaluated to NaN or infinity.
    #[error("non-finite value in {term}")]
    NonFinite { term: &'static str },

    /// State left the divergence guard box.
    #[error("state diverged: x = {x}, v = {v}")]
    Diverged { x: f64, v: f64 },

    #[error("invalid topology: {0}")]
    Topology(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("network architecture mismatch")]
    ArchitectureMismatch,

    #[error("signal has zero variance, phase is undefined")]
    ZeroVariance,

    #[error("series too short: need at least {needed} samples, got {got}")]
    SeriesTooShort { needed: usize, got: usize },

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),

    #[error("config error: {0}")]
    Config(String),

    /// Raised by the simulation loops with the trial and step where the
    /// underlying failure happened.
    #[error("trial {trial}, step {step}")]
    Trial {
        trial: usize,
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// The run left the guard box or produced a series the metrics cannot
    /// handle, as opposed to a configuration or I/O problem.
    pub fn is_degenerate_run(&self) -> bool {
        match self {
            Error::Trial { source, .. } => source.is_degenerate_run(),
            Error::Diverged { .. } | Error::NonFinite { .. } | Error::ZeroVariance => true,
            _ => false,
        }
    }

    pub(crate) fn at(self, trial: usize, step: usize) -> Self {
        Error::Trial {
            trial,
            step,
            source: Box::new(self),
        }
    }
}
