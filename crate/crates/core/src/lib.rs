//! Random completely positive maps built from Gaussian Unitary and Ginibre
//! ensembles, together with the free-probability machinery that predicts
//! their large-`n` behaviour.
//!
//! The crate has three layers:
//!
//! - deterministic numerics: dense complex matrices, Hermitian
//!   eigendecomposition, Schatten norms and entropy ([`matrixkit`]), seeded
//!   ensemble sampling ([`ensembles`]) and the CP maps themselves
//!   ([`channels`]);
//! - analytic limit quantities: the variational norm functional `f(A)`,
//!   Marchenko–Pastur edges, the Haagerup bound, limiting maximum output
//!   p-norms and the closed-form violation bounds ([`freelimits`]);
//! - certification: a brute-force non-crossing-partition oracle
//!   ([`ncoracle`]) and a Monte Carlo experiment harness ([`experiments`])
//!   that check the analytic layer against enumeration and finite-size
//!   sampling.

#![forbid(unsafe_code)]

pub mod channels;
pub mod ensembles;
pub mod experiments;
pub mod freelimits;
pub mod matrixkit;
pub mod ncoracle;

pub use channels::{ChannelKind, KrausFamily, Rectifier};
pub use ensembles::{EnsembleFlavor, SeedSpec};
pub use experiments::ExperimentPlan;
pub use freelimits::{CoefficientMatrix, TwoLevelProfile, ViolationReport};
pub use matrixkit::{CMat, HermMat, SchattenIndex, SpectralProfile};

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("not Hermitian: max |m - m*| entry is {max_dev:e}")]
    NotHermitian { max_dev: f64 },

    #[error("not positive semi-definite: min eigenvalue {min_eig:e}")]
    NotPsd { min_eig: f64 },

    #[error("trace {trace} is too far from 1")]
    InvalidTrace { trace: f64 },

    #[error("Schatten index must satisfy p > 1, got {p}")]
    InvalidSchattenIndex { p: f64 },

    #[error("operation requires a nonzero matrix")]
    ZeroMatrix,

    #[error("argument {value} outside the domain ({lo}, {hi})")]
    OutOfDomain { value: f64, lo: f64, hi: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error(
        "near-singular Kraus frame: min eigenvalue of sum X_i*X_i is {min_eig:e} \
         (finite-n failure of almost-sure invertibility)"
    )]
    NearSingularFrame { min_eig: f64 },

    #[error("rectified channel kind requires a rectifier; call build_rectifier first")]
    RectifierRequired,

    #[error("Hermitian eigensolver failed for a {dim}x{dim} matrix")]
    EigenFailure { dim: usize },

    #[error("{what} exceeds oracle size guard: {got} > {limit}")]
    SizeGuard {
        what: &'static str,
        limit: usize,
        got: usize,
    },

    #[error("invalid plan field `{field}`: {msg}")]
    InvalidPlan { field: String, msg: String },

    #[error("plan parse error: {0}")]
    PlanParse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
