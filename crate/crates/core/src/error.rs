use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A micro or macro update produced a non-finite value.
    #[error("numerical blowup at {location}: x = {x}, y = {y}")]
    NumericalBlowup { location: String, x: f64, y: f64 },

    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    #[error("need at least {needed} realizations, got {got}")]
    InsufficientRealizations { needed: usize, got: usize },

    #[error("evaluation at t = {t} lies within {tolerance:e} of a singularity of the exact solution")]
    Singularity { t: f64, tolerance: f64 },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// Attaches a location (e.g. "micro step 17") to a blowup error.
    pub fn at(self, location: impl Into<String>) -> Self {
        match self {
            Error::NumericalBlowup { x, y, .. } => Error::NumericalBlowup {
                location: location.into(),
                x,
                y,
            },
            other => other,
        }
    }
}
