//! Batch-size scaling study of SGD vs. sign-based optimizers on analytically
//! tractable problems.
//!
//! The crate provides:
//! - block-quadratic testbeds with heterogeneous/homogeneous Hessian layouts
//!   and an isotropic noisy quadratic ([`problems`]),
//! - the update rules under study: momentum SGD, Adam, SignSGD, signed
//!   momentum, grafting and adaptive momentum clipping ([`optimizers`]),
//! - SDE models of SGD and SignSGD with an Euler-Maruyama integrator and a
//!   Monte Carlo oracle for the erf drift identity ([`sde`]),
//! - step diagnostics: gradient correlation, directional sharpness and
//!   clipped-coordinate fractions ([`metrics`]),
//! - a deterministic sweep harness with CSV/JSON persistence ([`harness`]).

pub mod harness;
pub mod math;
pub mod metrics;
pub mod optimizers;
pub mod problems;
pub mod schedulers;
pub mod sde;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix not symmetric at ({i},{j}): {a} vs {b}")]
    NotSymmetric { i: usize, j: usize, a: f64, b: f64 },
    #[error("eigenvalues must be strictly positive, got {0}")]
    NonPositiveEigenvalue(f64),
    #[error("batch must be nonempty")]
    EmptyBatch,
    #[error("batch size must be positive")]
    ZeroBatchSize,
    #[error("noise variance must be strictly positive at coordinate {0}")]
    ZeroNoise(usize),
    #[error("non-finite state encountered at step {step}")]
    NonFiniteState { step: u64 },
    #[error("step {t} outside schedule range 0..={total}")]
    ScheduleOutOfRange { t: u64, total: u64 },
    #[error("empty block in partition at index {0}")]
    EmptyBlock(usize),
    #[error("partition covers {covered} of {dim} coordinates")]
    PartitionMismatch { covered: usize, dim: usize },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("failed to parse config: {0}")]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
