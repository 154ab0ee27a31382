use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite values encountered in {context}")]
    NonFinite { context: String },

    #[error("grid does not contain the profile: |u({x:+.3})| = {value:.3e} exceeds {tol:.1e}")]
    GridTooSmall { x: f64, value: f64, tol: f64 },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParam { name: &'static str, reason: String },

    #[error("field grids differ ({0} vs {1})")]
    GridMismatch(String, String),

    #[error("observable log too short: need at least {need} records, have {have}")]
    ShortLog { need: usize, have: usize },

    #[error("operation requires space-independent noise (a single constant mode)")]
    SpaceDependentNoise,

    #[error("trajectory {index} failed: {source}")]
    Trajectory {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{0}")]
    Config(#[from] crate::config::ConfigError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParam {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
