use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix has non-finite entries")]
    NonFinite,

    #[error("matrix is not sectorial (sectoriality margin {margin:.3e})")]
    NotSectorial { margin: f64 },

    #[error("matrix is not {r}-sectorial (margin {margin:.3e})")]
    NotRSectorial { r: f64, margin: f64 },

    #[error("evaluation point is within {distance:.3e} of a pole")]
    PoleProximity { distance: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("feedback interconnection is ill-posed: {0}")]
    IllPosed(String),

    #[error("SDP backend returned no usable answer: {0}")]
    SdpUnknown(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
