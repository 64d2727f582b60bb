use thiserror::Error;

/// Errors raised by construction, solvers, and steppers.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("convexity violated: eps = {eps} must satisfy |eps| < 1/2")]
    ConvexityViolated { eps: f64 },

    #[error("tilt bracket expansion exceeded {max_expansions} doublings (sigma = {sigma})")]
    TiltBracket { sigma: f64, max_expansions: u32 },

    #[error("quadrature did not converge: residual {residual:.3e} above tolerance {tol:.3e}")]
    QuadratureNonConvergence { residual: f64, tol: f64 },

    #[error("degenerate measure: Var(u) = {variance:.3e} below 1e-12")]
    DegenerateMeasure { variance: f64 },

    #[error("brute-force canonical quadrature supports |I| in 2..=4, got {size}")]
    UnsupportedBlockSize { size: usize },

    #[error("time step {dt:.3e} exceeds stability bound {dt_max:.3e}")]
    StabilityViolation { dt: f64, dt_max: f64 },

    #[error("kernel build produced negative mass {value:.3e} at displacement {at}")]
    NegativeKernelMass { value: f64, at: usize },

    #[error("exponent overflow in Gartner transform: |lambda*h| = {magnitude:.3e} > 700")]
    GartnerOverflow { magnitude: f64 },

    #[error("snapshot at t = {t} not recorded in trajectory")]
    SnapshotNotRecorded { t: f64 },

    #[error("degenerate coupling constant: |lambda(t)| = {lambda:.3e} below 1e-8 at t = {t}")]
    DegenerateCoupling { lambda: f64, t: f64 },

    #[error("localized interval of length {needed} does not fit in torus of size {n}")]
    LocalizationTooWide { needed: usize, n: usize },

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
