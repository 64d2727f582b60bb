//! Numerical laboratory for a conservative lattice interface model with a
//! time-dependent convex potential: the charge-field SDE on the discrete
//! torus, its integrated current and height function, exponentially tilted
//! single-site ensembles with homogenized coefficients, the semi-discrete
//! heat kernel of the homogenized parabolic operator, a discrete
//! time-inhomogeneous stochastic heat equation driven by the same noise
//! tape, and diagnostics for centering identities and block-average decay.

pub mod bg;
pub mod cole_hopf;
pub mod ensemble;
pub mod error;
pub mod heat_kernel;
pub mod lattice;
pub mod noise;
pub mod potential;
pub mod quadrature;
pub mod report;
pub mod spline;
pub mod tishe;

pub use error::Error;

/// Wrap a signed site index onto the torus of size `n`.
#[inline]
pub fn wrap(x: i64, n: usize) -> usize {
    let n = n as i64;
    (((x % n) + n) % n) as usize
}

/// Geodesic distance between two sites of the torus of size `n`.
#[inline]
pub fn torus_dist(x: usize, y: usize, n: usize) -> usize {
    let d = if x > y { x - y } else { y - x };
    d.min(n - d)
}
