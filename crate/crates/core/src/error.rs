use thiserror::Error;

/// Errors raised by the set algebra, the inference recursion, the filter and the harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: expected {expected}, found {found}")]
    DimensionMismatch {
        op: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid interval: {0}")]
    InvalidInterval(String),

    #[error("invalid set: {0}")]
    InvalidSet(String),

    #[error("set is empty")]
    EmptySet,

    /// An intersection in the inference recursion came out empty. `stage` names the
    /// recursion step that failed (e.g. "backward public-state calibration").
    #[error("observation inconsistent with the model at k = {k}: empty set in {stage}")]
    InconsistentObservation { k: usize, stage: &'static str },

    #[error("CCG inference horizon cap of {cap} steps exceeded")]
    HorizonCapExceeded { cap: usize },

    #[error("linear program failed ({status}): {detail}")]
    Solver { status: String, detail: String },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error("point lies outside the quantizer cover")]
    CoverMiss,

    #[error("invalid system: {}", .0.join("; "))]
    InvalidSystem(Vec<String>),

    #[error("configuration error: {}", .0.join("; "))]
    Config(Vec<String>),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_dim(op: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { op, expected, found })
    }
}
