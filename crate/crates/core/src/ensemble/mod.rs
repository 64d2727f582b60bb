//! Exponentially tilted single-site ensembles, their conditioned (canonical)
//! counterparts, homogenized coefficients, and the coefficient cache used by
//! the kernel and reference-equation solvers.

mod canonical;
mod sampling;

pub use canonical::{
    block_density, canonical_expect_bruteforce, canonical_single_site, ensemble_gap_curve,
    gauss_legendre_pub, local_canonical_expect, CanonicalMarginal, LocalExpectMethod,
};
pub use sampling::{sample_canonical, CanonicalSampler, GcSampler};

use crate::error::{Error, Result};
use crate::potential::Potential;
use crate::quadrature::integrate;
use crate::spline::UniformSpline;
use serde::Serialize;

/// Default quadrature tolerance for ensemble expectations.
pub const GC_TOL: f64 = 1e-11;

/// Single-site tilted measure `exp{tilt*u - U(t,u) - log_norm} du`,
/// normalized so the total mass is one.
#[derive(Debug, Clone)]
pub struct GcMeasure<'a> {
    pot: &'a Potential,
    pub sigma: f64,
    pub t: f64,
    pub tilt: f64,
    pub log_norm: f64,
    center: f64,
    half_width: f64,
    tol: f64,
}

/// Newton solve of U'(t, u) = tilt; unique root by uniform convexity.
fn exponent_mode(pot: &Potential, t: f64, tilt: f64) -> f64 {
    let mut u = tilt;
    for _ in 0..80 {
        let g = pot.du(t, u) - tilt;
        let step = g / pot.d2u(t, u);
        u -= step;
        if step.abs() < 1e-13 * (1.0 + u.abs()) {
            break;
        }
    }
    u
}

impl<'a> GcMeasure<'a> {
    /// Build the measure for a given tilt (not density); computes the
    /// normalizer and truncation window.
    pub fn with_tilt(pot: &'a Potential, t: f64, tilt: f64, tol: f64) -> Result<Self> {
        let center = exponent_mode(pot, t, tilt);
        let sd = 1.0 / pot.c_lo().sqrt();
        let half_width = f64::max(12.0, 12.0 * sd) * sd;
        let peak = tilt * center - pot.u(t, center);
        let mass = integrate(
            |u| (tilt * u - pot.u(t, u) - peak).exp(),
            center - half_width,
            center + half_width,
            tol,
        )?;
        let log_norm = peak + mass.ln();
        let mut m = Self {
            pot,
            sigma: 0.0,
            t,
            tilt,
            log_norm,
            center,
            half_width,
            tol,
        };
        m.sigma = m.expect(|u| u)?;
        Ok(m)
    }

    /// Build the measure of prescribed mean `sigma` by solving for the tilt.
    pub fn with_mean(pot: &'a Potential, sigma: f64, t: f64, tol: f64) -> Result<Self> {
        let tilt = solve_tilt(pot, sigma, t, tol)?;
        let mut m = Self::with_tilt(pot, t, tilt, GC_TOL.min(tol))?;
        m.sigma = sigma;
        Ok(m)
    }

    #[inline]
    pub fn density(&self, u: f64) -> f64 {
        (self.tilt * u - self.pot.u(self.t, u) - self.log_norm).exp()
    }

    /// Expectation of `f` under the measure.
    pub fn expect<F: Fn(f64) -> f64>(&self, f: F) -> Result<f64> {
        integrate(
            |u| f(u) * self.density(u),
            self.center - self.half_width,
            self.center + self.half_width,
            self.tol,
        )
    }

    pub fn mean(&self) -> Result<f64> {
        self.expect(|u| u)
    }

    pub fn variance(&self) -> Result<f64> {
        let m = self.mean()?;
        self.expect(|u| (u - m) * (u - m))
    }

    pub fn covariance_with_u<F: Fn(f64) -> f64>(&self, f: F) -> Result<f64> {
        let m = self.mean()?;
        let ef = self.expect(&f)?;
        self.expect(|u| (f(u) - ef) * (u - m))
    }

    pub fn potential(&self) -> &Potential {
        self.pot
    }

    pub fn window(&self) -> (f64, f64) {
        (self.center - self.half_width, self.center + self.half_width)
    }
}

fn mean_at_tilt(pot: &Potential, t: f64, tilt: f64, tol: f64) -> Result<(f64, f64)> {
    let m = GcMeasure::with_tilt(pot, t, tilt, tol)?;
    let mean = m.mean()?;
    let var = m.expect(|u| (u - mean) * (u - mean))?;
    Ok((mean, var))
}

/// Root of `mean(tilt) = sigma`. The map is strictly increasing (its
/// derivative is the variance), so a sign-bracketing bisection followed by
/// Newton polishing converges to the unique root.
pub fn solve_tilt(pot: &Potential, sigma: f64, t: f64, tol: f64) -> Result<f64> {
    assert!(tol > 0.0);
    let inner = (tol * 1e-2).min(GC_TOL);
    let mut lo = sigma - 1.0;
    let mut hi = sigma + 1.0;
    let mut f_lo = mean_at_tilt(pot, t, lo, inner)?.0 - sigma;
    let mut f_hi = mean_at_tilt(pot, t, hi, inner)?.0 - sigma;
    let max_expansions = 60;
    let mut n = 0;
    while f_lo > 0.0 || f_hi < 0.0 {
        n += 1;
        if n > max_expansions {
            return Err(Error::TiltBracket {
                sigma,
                max_expansions,
            });
        }
        let w = hi - lo;
        if f_lo > 0.0 {
            lo -= w;
            f_lo = mean_at_tilt(pot, t, lo, inner)?.0 - sigma;
        } else {
            hi += w;
            f_hi = mean_at_tilt(pot, t, hi, inner)?.0 - sigma;
        }
    }
    for _ in 0..30 {
        let mid = 0.5 * (lo + hi);
        let fm = mean_at_tilt(pot, t, mid, inner)?.0 - sigma;
        if fm < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut tilt = 0.5 * (lo + hi);
    for _ in 0..8 {
        let (mean, var) = mean_at_tilt(pot, t, tilt, inner)?;
        let err = mean - sigma;
        if err.abs() <= 0.1 * tol {
            break;
        }
        tilt -= err / var;
    }
    Ok(tilt)
}

/// Expectation of `f` under the tilted measure of mean `sigma` at time `t`.
pub fn gc_expect<F: Fn(f64) -> f64>(pot: &Potential, sigma: f64, t: f64, f: F) -> Result<f64> {
    GcMeasure::with_mean(pot, sigma, t, GC_TOL)?.expect(f)
}

/// Density-derivative of the expectation of `f`.
///
/// Order 1 uses the exact chain rule through the tilt,
/// `Cov(f, u) / Var(u)`; order 2 is a central difference of the order-1
/// value at step `1e-2` with one Richardson extrapolation.
pub fn sigma_derivative<F: Fn(f64) -> f64>(
    pot: &Potential,
    sigma: f64,
    t: f64,
    f: F,
    order: u8,
) -> Result<f64> {
    sigma_derivative_dyn(pot, sigma, t, &f, order)
}

fn sigma_derivative_dyn(
    pot: &Potential,
    sigma: f64,
    t: f64,
    f: &dyn Fn(f64) -> f64,
    order: u8,
) -> Result<f64> {
    match order {
        1 => {
            let m = GcMeasure::with_mean(pot, sigma, t, GC_TOL)?;
            let var = m.variance()?;
            if var < 1e-12 {
                return Err(Error::DegenerateMeasure { variance: var });
            }
            Ok(m.covariance_with_u(f)? / var)
        }
        2 => {
            let h = 1e-2;
            let d = |hh: f64| -> Result<f64> {
                let up = sigma_derivative_dyn(pot, sigma + hh, t, f, 1)?;
                let dn = sigma_derivative_dyn(pot, sigma - hh, t, f, 1)?;
                Ok((up - dn) / (2.0 * hh))
            };
            let d_h = d(h)?;
            let d_h2 = d(0.5 * h)?;
            Ok((4.0 * d_h2 - d_h) / 3.0)
        }
        _ => panic!("sigma_derivative supports orders 1 and 2"),
    }
}

/// Homogenized coefficients at a fixed time.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct HomogenizedCoefficients {
    pub t: f64,
    pub alpha_bar: f64,
    pub alpha_bar_wedge: f64,
    pub lambda: f64,
    pub renorm: f64,
    /// Set when the quadratic coefficient vanishes (coupling degenerates to
    /// the linear equation); not an error, the quadratic baseline is
    /// legitimately degenerate.
    pub degenerate: bool,
}

/// Assemble the homogenized coefficients at time `t`: the first and second
/// density-derivatives of the mean drift response, their ratio, and the
/// deterministic counter-term for the exponentiated height.
pub fn homogenized(pot: &Potential, t: f64) -> Result<HomogenizedCoefficients> {
    let du = |u: f64| pot.du(t, u);
    let alpha_bar = sigma_derivative(pot, 0.0, t, du, 1)?;
    let alpha_bar_wedge = sigma_derivative(pot, 0.0, t, du, 2)?;
    let lambda = alpha_bar_wedge / alpha_bar;
    let m0 = GcMeasure::with_mean(pot, 0.0, t, GC_TOL)?;
    let e_du_u3 = m0.expect(|u| pot.du(t, u) * u * u * u)?;
    let e_u3 = m0.expect(|u| u * u * u)?;
    let renorm = lambda.powi(3) / 12.0 * e_du_u3 + lambda * lambda * alpha_bar / 6.0 * e_u3;
    Ok(HomogenizedCoefficients {
        t,
        alpha_bar,
        alpha_bar_wedge,
        lambda,
        renorm,
        degenerate: alpha_bar_wedge.abs() < 1e-10,
    })
}

/// Residual of the integration-by-parts identity
/// `E[f U'] = tilt * E[f] + E[f']` under the mean-`sigma` measure.
pub fn ibp_check<F, G>(pot: &Potential, sigma: f64, t: f64, f: F, f_prime: G) -> Result<f64>
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    let m = GcMeasure::with_mean(pot, sigma, t, GC_TOL)?;
    let lhs = m.expect(|u| f(u) * pot.du(t, u))?;
    let rhs = m.tilt * m.expect(&f)? + m.expect(&f_prime)?;
    Ok((lhs - rhs).abs())
}

/// Time-splined homogenized coefficients with exact cumulative integrals of
/// the interpolants; shared by the kernel builder, the height
/// renormalization, and the reference-equation stepper.
#[derive(Debug, Clone)]
pub struct CoefficientCache {
    pub t_max: f64,
    alpha_bar: UniformSpline,
    alpha_wedge: UniformSpline,
    lambda: UniformSpline,
    renorm: UniformSpline,
    lambda2_alpha: UniformSpline,
    pub degenerate: bool,
    time_independent: bool,
}

impl CoefficientCache {
    /// Sample `homogenized` on a uniform grid over `[0, t_max]` and spline.
    pub fn build(pot: &Potential, t_max: f64, grid_step: f64) -> Result<Self> {
        assert!(t_max > 0.0 && grid_step > 0.0);
        let n = ((t_max / grid_step).ceil() as usize).max(8);
        let h = t_max / n as f64;
        let mut va = Vec::with_capacity(n + 1);
        let mut vw = Vec::with_capacity(n + 1);
        let mut vl = Vec::with_capacity(n + 1);
        let mut vr = Vec::with_capacity(n + 1);
        let mut vla = Vec::with_capacity(n + 1);
        let mut degenerate = false;
        let time_independent = pot.time_independent();
        if time_independent {
            // one evaluation fills the grid with bitwise-equal values, so
            // interpolation and the d/dt probe are exactly constant / zero
            let c = homogenized(pot, 0.0)?;
            degenerate = c.degenerate;
            for _ in 0..=n {
                va.push(c.alpha_bar);
                vw.push(c.alpha_bar_wedge);
                vl.push(c.lambda);
                vr.push(c.renorm);
                vla.push(c.lambda * c.lambda * c.alpha_bar);
            }
        } else {
            for i in 0..=n {
                let c = homogenized(pot, i as f64 * h)?;
                degenerate |= c.degenerate;
                va.push(c.alpha_bar);
                vw.push(c.alpha_bar_wedge);
                vl.push(c.lambda);
                vr.push(c.renorm);
                vla.push(c.lambda * c.lambda * c.alpha_bar);
            }
        }
        Ok(Self {
            t_max,
            alpha_bar: UniformSpline::new(0.0, h, va),
            alpha_wedge: UniformSpline::new(0.0, h, vw),
            lambda: UniformSpline::new(0.0, h, vl),
            renorm: UniformSpline::new(0.0, h, vr),
            lambda2_alpha: UniformSpline::new(0.0, h, vla),
            degenerate,
            time_independent,
        })
    }

    pub fn alpha_bar(&self, t: f64) -> f64 {
        self.alpha_bar.eval(t)
    }

    pub fn alpha_wedge(&self, t: f64) -> f64 {
        self.alpha_wedge.eval(t)
    }

    pub fn lambda(&self, t: f64) -> f64 {
        self.lambda.eval(t)
    }

    pub fn renorm(&self, t: f64) -> f64 {
        self.renorm.eval(t)
    }

    /// d/dt log|lambda(t)| numerator: central difference at step 1e-4.
    /// Exactly zero for a time-independent potential, so the
    /// log-nonlinearity vanishes identically rather than to roundoff.
    pub fn lambda_prime(&self, t: f64) -> f64 {
        if self.time_independent {
            return 0.0;
        }
        let h = 1e-4;
        let lo = (t - h).max(0.0);
        let hi = (t + h).min(self.t_max);
        (self.lambda.eval(hi) - self.lambda.eval(lo)) / (hi - lo)
    }

    /// Integral of alpha_bar over `[s, t]` (exact on the interpolant).
    pub fn int_alpha(&self, s: f64, t: f64) -> f64 {
        self.alpha_bar.integral_from_start(t) - self.alpha_bar.integral_from_start(s)
    }

    /// Integral of `lambda^2 * alpha_bar` over `[s, t]`.
    pub fn int_lambda2_alpha(&self, s: f64, t: f64) -> f64 {
        self.lambda2_alpha.integral_from_start(t) - self.lambda2_alpha.integral_from_start(s)
    }

    /// Integral of the renormalization counter-term over `[0, t]`.
    pub fn int_renorm(&self, t: f64) -> f64 {
        self.renorm.integral(0.0, t)
    }
}

/// Coefficient table row for export.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CoefficientRow {
    pub t: f64,
    pub alpha_bar: f64,
    pub alpha_bar_wedge: f64,
    pub lambda: f64,
    pub renorm: f64,
}

impl CoefficientCache {
    pub fn table(&self, step: f64) -> Vec<CoefficientRow> {
        let mut rows = Vec::new();
        let mut t = 0.0;
        while t <= self.t_max + 1e-12 {
            rows.push(CoefficientRow {
                t,
                alpha_bar: self.alpha_bar(t),
                alpha_bar_wedge: self.alpha_wedge(t),
                lambda: self.lambda(t),
                renorm: self.renorm(t),
            });
            t += step;
        }
        rows
    }
}
