use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("point {0} lies outside the domain")]
    OutsideDomain(String),

    #[error("integrand is not integrable: {0}")]
    NotIntegrable(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("unknown name {0:?}")]
    UnknownName(String),
}

pub type Result<T> = std::result::Result<T, Error>;
