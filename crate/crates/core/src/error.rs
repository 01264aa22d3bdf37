use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value is outside the operation's domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A guaranteed bracket or positivity condition failed. This points at a
    /// convention bug rather than a numerical one.
    #[error("structural error: {0}")]
    Structural(String),

    #[error("no inflection point certified for band {n}: {reason}")]
    NoInflection { n: u32, reason: String },

    #[error("expansion used outside its validity range: {0}")]
    OutsideValidity(String),

    #[error("resolution refused: {nodes} quadrature nodes requested, cap is {cap}")]
    ResolutionRefused { nodes: usize, cap: usize },

    #[error("spectral parameter {0} lies within the exclusion margin of the spectrum")]
    OnSpectrum(String),

    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serialize(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
