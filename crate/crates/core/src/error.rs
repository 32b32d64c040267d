use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("mode {mode} out of range for a {mode_count}-mode space")]
    ModeOutOfRange { mode: usize, mode_count: usize },

    #[error("states live in different Hilbert spaces")]
    SpaceMismatch,

    #[error("photon-number cutoff {n_max} too small: {detail}")]
    CutoffTooSmall { n_max: usize, detail: String },

    #[error("cannot normalize a zero vector")]
    ZeroNorm,

    #[error("all mixture weights are zero")]
    ZeroWeights,

    #[error("estimate undefined: {0}")]
    UndefinedEstimate(String),

    #[error("degenerate fit data: {0}")]
    DegenerateData(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
