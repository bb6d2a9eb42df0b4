use thiserror::Error;

/// Errors raised across the library.
///
/// Numerical failures that have a documented fallback (branch selection,
/// singular mode matrix) are ordinary variants; callers decide whether to
/// retry on another route.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("neutrino energy must be positive, got {0} eV")]
    NonPositiveEnergy(f64),

    #[error("mass-squared splitting must be positive, got {0} eV^2")]
    NonPositiveSplitting(f64),

    #[error("{name} = {value} rad is outside its allowed range")]
    AngleOutOfRange { name: &'static str, value: f64 },

    #[error("matter potential ratio eta must be non-negative, got {0}")]
    NegativePotential(f64),

    #[error("decay coefficient c[{index}][{index}] = {value} is negative")]
    NegativeDiagonalDecay { index: usize, value: f64 },

    #[error("{0} is not finite")]
    NonFinite(&'static str),

    #[error("matrix is not Hermitian (residual {residual:e})")]
    NonHermitianInput { residual: f64 },

    #[error("density matrix trace is {trace}, expected 1")]
    NonUnitTrace { trace: f64 },

    #[error("Bloch vector norm {norm} exceeds the unit ball")]
    VectorOutsideSphere { norm: f64 },

    #[error("no cube-root branch reproduces the numeric spectrum (best relative error {best_rel_err:e})")]
    BranchSelectionFailure { best_rel_err: f64 },

    #[error("mode matrix is singular or the generator is degenerate")]
    SingularModeMatrix,

    #[error("adaptive step collapsed to {step:e} eV^-1 at t = {t:e} eV^-1")]
    StepUnderflow { t: f64, step: f64 },

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("endpoint overlap vanishes (|overlap| = {magnitude:e}); total phase undefined")]
    ZeroOverlap { magnitude: f64 },

    #[error("azimuth jumps by {delta_beta} rad between nodes {index} and {}; refine the trajectory", index + 1)]
    SparseTrajectory { index: usize, delta_beta: f64 },

    #[error("need at least {needed} nodes, got {got}")]
    TooFewNodes { needed: usize, got: usize },

    #[error("trace of the density-matrix chain vanishes (|tr| = {magnitude:e})")]
    VanishingTrace { magnitude: f64 },

    #[error("decay matrix is not rank one (residual {residual:e}); nearest d = {nearest:?}")]
    NotRankOne { nearest: [f64; 3], residual: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
