use thiserror::Error;

use crate::mixture::BoundaryClass;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("impact operator precondition failed: boundary class is {0:?}")]
    Precondition(BoundaryClass),

    #[error("pathological configuration: {0}")]
    Pathology(String),

    #[error("scaling infeasible: {0}")]
    ScalingInfeasible(String),

    #[error("exhausted reservoir: N_beta = {available}, requested {requested}")]
    ExhaustedReservoir { available: usize, requested: usize },

    #[error("infeasible density: acceptance rate {rate:.3e} below floor {floor:.1e}")]
    InfeasibleDensity { rate: f64, floor: f64 },

    #[error("horizon too long: {0}")]
    HorizonTooLong(String),

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("empty domain: {0}")]
    EmptyDomain(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("outside domain: {0}")]
    Domain(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
