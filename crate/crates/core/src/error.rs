use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AleError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("univalence violation: |gamma| = {modulus} is below the threshold {threshold} for c = {capacity}")]
    UnivalenceViolation {
        modulus: f64,
        threshold: f64,
        capacity: f64,
    },

    #[error("point ({re}, {im}) lies outside the exterior domain |z| > 1")]
    Domain { re: f64, im: f64 },

    #[error("derivative is singular near ({re}, {im})")]
    Singular { re: f64, im: f64 },

    #[error("run health check failed at step {step}: {detail}")]
    RunHealth { step: usize, detail: String },

    #[error("Laurent extraction failed: {0}")]
    Extraction(String),

    #[error("series truncation insufficient: tail bound {tail_bound:e} exceeds {tolerance:e}")]
    TruncationInsufficient { tail_bound: f64, tolerance: f64 },

    #[error("ensemble of {got} runs is below the required {need}")]
    InsufficientEnsemble { got: usize, need: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),
}

pub type Result<T> = std::result::Result<T, AleError>;
