//! Independent oracles for integration tests: plain fixed-grid trapezoid
//! expectations and bisection-only tilt solving. Deliberately avoids the
//! library's adaptive quadrature and Newton paths.

#![allow(dead_code)]

use glkpz_core::potential::Potential;

pub const ORACLE_GRID: usize = 150_000;
pub const ORACLE_HALF_WIDTH: f64 = 18.0;

/// Trapezoid integral of `f` against exp(tilt*u - U(t,u)) over a wide fixed
/// window, unnormalized.
pub fn raw_integral<F: Fn(f64) -> f64>(pot: &Potential, t: f64, tilt: f64, f: F, grid: usize) -> f64 {
    let a = tilt - ORACLE_HALF_WIDTH;
    let b = tilt + ORACLE_HALF_WIDTH;
    let h = (b - a) / grid as f64;
    let mut acc = 0.0;
    for i in 0..=grid {
        let u = a + i as f64 * h;
        let w = if i == 0 || i == grid { 0.5 } else { 1.0 };
        acc += w * f(u) * (tilt * u - pot.u(t, u)).exp();
    }
    acc * h
}

/// Normalized expectation under the tilted measure.
pub fn expect_at_tilt<F: Fn(f64) -> f64>(pot: &Potential, t: f64, tilt: f64, f: F) -> f64 {
    let z = raw_integral(pot, t, tilt, |_| 1.0, ORACLE_GRID);
    raw_integral(pot, t, tilt, f, ORACLE_GRID) / z
}

/// Bisection-only solve of mean(tilt) = sigma.
pub fn solve_tilt_oracle(pot: &Potential, sigma: f64, t: f64) -> f64 {
    let mut lo = sigma - 4.0;
    let mut hi = sigma + 4.0;
    for _ in 0..70 {
        let mid = 0.5 * (lo + hi);
        if expect_at_tilt(pot, t, mid, |u| u) < sigma {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Expectation under the mean-sigma measure, fully through the oracle path.
pub fn gc_expect_oracle<F: Fn(f64) -> f64>(pot: &Potential, sigma: f64, t: f64, f: F) -> f64 {
    let tilt = solve_tilt_oracle(pot, sigma, t);
    expect_at_tilt(pot, t, tilt, f)
}

/// 5-point central finite difference of a function of sigma.
pub fn fd5<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h)
}

/// 5-point second derivative.
pub fn fd5_second<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    (-f(x - 2.0 * h) + 16.0 * f(x - h) - 30.0 * f(x) + 16.0 * f(x + h) - f(x + 2.0 * h))
        / (12.0 * h * h)
}
