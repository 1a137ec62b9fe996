//! Variance-based joint sparsity (VBJS) recovery of piecewise-smooth signals
//! and images from banded, possibly incomplete Fourier data.
//!
//! The crate covers the full path from raw Fourier coefficients to a
//! reconstruction:
//!
//! 1. edge detection straight from the coefficients via concentration
//!    factors ([`conc`]), including convex design of factors tailored to
//!    missing frequency bands ([`icf`]);
//! 2. spatially adaptive regularization weights built from the variance of
//!    several edge-map approximations ([`weights`]);
//! 3. weighted l1/l2 inversion with a polynomial-annihilation sparsifying
//!    transform ([`pa`], [`solvers`]);
//! 4. ready-made end-to-end pipelines ([`pipelines`]) and a seeded,
//!    reproducible experiment harness ([`experiment`]).
//!
//! One-dimensional signals live on the uniform grid of [`grid::Grid1D`]
//! over `[-pi, pi)`; the 2D test scene lives on `[-1, 1]^2` ([`scene`]).

pub mod conc;
pub mod experiment;
pub mod fourier;
pub mod grid;
pub mod icf;
pub mod linalg;
pub mod metrics;
pub mod pa;
pub mod pipelines;
pub mod scene;
pub mod solvers;
pub mod weights;

pub use conc::{exponential_cf, ConcentrationFactor};
pub use fourier::{FourierData, MeasurementSet};
pub use grid::Grid1D;
pub use icf::{design_icf, IcfParams};
pub use pa::PaOperator;
pub use solvers::SolverOpts;
pub use weights::WeightVector;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum VbjsError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("bandwidth mismatch: expected N = {expected}, got N = {got}")]
    BandwidthMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    /// The concentration-factor design problem has no feasible point (or the
    /// solver hit its iteration cap with a gross constraint violation).
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// An iterative solver failed to reach its required tolerance.
    #[error("solver failure: {0}")]
    SolverFailure(String),

    #[error("config error at line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, VbjsError>;
