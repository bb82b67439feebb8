use thiserror::Error;

use crate::specfun::SpecError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("posterior families do not match: {0}")]
    FamilyMismatch(String),
    #[error("sampler failure: {0}")]
    Sampler(String),
    #[error("replicate {index} failed: {source}")]
    Replicate { index: u64, source: Box<Error> },
    #[error("{failed} of {total} replicates failed; first failure: {first}")]
    TooManyFailures {
        failed: usize,
        total: usize,
        first: Box<Error>,
    },
    #[error("not enough records: {0}")]
    InsufficientRecords(String),
    #[error("calibration failed: {0}")]
    Calibration(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
