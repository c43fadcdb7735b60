use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),
    #[error("field representation mismatch: expected {expected}, found {found}")]
    Representation {
        expected: &'static str,
        found: &'static str,
    },
    #[error("singular boundary rows: {0}")]
    SingularBoundary(String),
    #[error("CFL violation at step {step}: cfl = {cfl:.4} exceeds {limit}")]
    Cfl { step: u64, cfl: f64, limit: f64 },
    #[error("invalid input: {0}")]
    Input(String),
    #[error("closure only available for Hookean springs with k = 1")]
    UnsupportedClosure,
    #[error("ensemble is empty")]
    EmptyEnsemble,
    #[error("empty averaging window")]
    EmptyWindow,
    #[error("checkpoint format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
