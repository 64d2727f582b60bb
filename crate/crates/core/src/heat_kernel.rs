//! Semi-discrete heat kernel of the homogenized parabolic operator on the
//! torus, built spectrally: the jump-free generator is a circulant whose
//! symbols at different times commute, so the time-ordered exponential
//! collapses to a single symbol integral. The deterministic characteristic
//! jumps enter as an integer offset.

use crate::cole_hopf::Characteristic;
use crate::ensemble::CoefficientCache;
use crate::error::{Error, Result};
use crate::{torus_dist, wrap};
use rustfft::{num_complex::Complex64, FftPlanner};
use serde::Serialize;

/// Tolerance below which spectral ringing is clamped to zero.
const CLAMP_TOL: f64 = 1e-13;

pub struct KernelEngine<'a> {
    pub n: usize,
    pub cache: &'a CoefficientCache,
    pub charac: &'a Characteristic,
}

/// One kernel slice in convolution form: `H(s,t,x,y) = k[(y - x + offset) mod N]`.
#[derive(Debug, Clone)]
pub struct KernelSlice {
    pub n: usize,
    pub s: f64,
    pub t: f64,
    pub offset: i64,
    pub k: Vec<f64>,
}

impl<'a> KernelEngine<'a> {
    pub fn new(n: usize, cache: &'a CoefficientCache, charac: &'a Characteristic) -> Self {
        assert_eq!(charac.n, n, "characteristic built for a different torus");
        Self { n, cache, charac }
    }

    /// Build the kernel for the window `[s, t]`.
    pub fn build(&self, s: f64, t: f64) -> Result<KernelSlice> {
        assert!(s <= t, "kernel window must have s <= t");
        let n = self.n;
        let nf = n as f64;
        let i_alpha = self.cache.int_alpha(s, t);
        let i_l2a = self.cache.int_lambda2_alpha(s, t);
        let diff_scale = nf * nf * i_alpha + 0.25 * nf * i_l2a;
        let drift_scale = 2.0 * nf.powf(1.5) * i_alpha;
        let mut spec: Vec<Complex64> = (0..n)
            .map(|m| {
                let theta = 2.0 * std::f64::consts::PI * m as f64 / nf;
                let a = (2.0 * theta.cos() - 2.0) * diff_scale;
                let b = drift_scale * theta.sin();
                Complex64::from_polar(a.exp(), b)
            })
            .collect();
        let mut planner = FftPlanner::new();
        planner.plan_fft_forward(n).process(&mut spec);
        let mut k: Vec<f64> = spec.iter().map(|c| c.re / nf).collect();
        let mut mass = 0.0;
        for (d, v) in k.iter_mut().enumerate() {
            if *v < 0.0 {
                if *v < -CLAMP_TOL {
                    return Err(Error::NegativeKernelMass { value: *v, at: d });
                }
                *v = 0.0;
            }
            mass += *v;
        }
        for v in k.iter_mut() {
            *v /= mass;
        }
        Ok(KernelSlice {
            n,
            s,
            t,
            offset: self.charac.offset(s, t),
            k,
        })
    }
}

impl KernelSlice {
    /// Identity slice (t = s).
    pub fn identity(n: usize, s: f64) -> Self {
        let mut k = vec![0.0; n];
        k[0] = 1.0;
        Self {
            n,
            s,
            t: s,
            offset: 0,
            k,
        }
    }

    pub fn mass(&self) -> f64 {
        self.k.iter().sum()
    }

    /// Apply to a field: `out[x] = sum_y H(x,y) phi[y]`.
    pub fn apply(&self, phi: &[f64]) -> Vec<f64> {
        assert_eq!(phi.len(), self.n);
        let n = self.n;
        let mut out = vec![0.0; n];
        for (x, o) in out.iter_mut().enumerate() {
            let base = x as i64 - self.offset;
            let mut acc = 0.0;
            for (d, &kv) in self.k.iter().enumerate() {
                if kv != 0.0 {
                    acc += kv * phi[wrap(base + d as i64, n)];
                }
            }
            *o = acc;
        }
        out
    }

    /// Composition `other âˆ˜ self` as convolution coefficients (offsets add).
    pub fn compose(&self, other: &KernelSlice) -> KernelSlice {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut k = vec![0.0; n];
        for (d1, &a) in self.k.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (d2, &b) in other.k.iter().enumerate() {
                k[(d1 + d2) % n] += a * b;
            }
        }
        KernelSlice {
            n,
            s: self.s,
            t: other.t,
            offset: self.offset + other.offset,
            k,
        }
    }
}

/// Sup-norm residual of the two-step composition against the directly built
/// kernel over `[s, t]` with intermediate time `r`.
pub fn verify_semigroup(engine: &KernelEngine, s: f64, r: f64, t: f64) -> Result<f64> {
    assert!(s <= r && r <= t);
    let first = engine.build(s, r)?;
    let second = engine.build(r, t)?;
    let direct = engine.build(s, t)?;
    let comp = first.compose(&second);
    assert_eq!(comp.offset, direct.offset, "jump counts must add over adjacent windows");
    let res = comp
        .k
        .iter()
        .zip(&direct.k)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    Ok(res)
}

#[derive(Debug, Clone, Serialize)]
pub struct GradientScalingRow {
    pub l: i64,
    pub grad_sum: f64,
    pub grad_sup: f64,
    /// measured / predicted, prediction `|t-s|^{-1/2} |l|` for the sum
    pub sum_ratio: f64,
    /// measured / predicted, prediction `N^{-1} |t-s|^{-1} |l|` for the sup
    pub sup_ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RegularityReport {
    pub n: usize,
    pub dt_window: f64,
    pub rows: Vec<GradientScalingRow>,
    pub moment_p2: f64,
    /// measured / predicted, prediction `|t-s| + N^{-2}`
    pub moment_ratio: f64,
    /// gradient-sum growth factor when the window is halved
    pub halving_factor: f64,
}

/// Gradient sums, sup bounds, and the p = 2 moment of one kernel window,
/// reported against their predicted scalings.
pub fn verify_regularity(
    engine: &KernelEngine,
    s: f64,
    t: f64,
    l_list: &[i64],
) -> Result<RegularityReport> {
    let slice = engine.build(s, t)?;
    let half = engine.build(s, s + 0.5 * (t - s))?;
    let n = engine.n;
    let nf = n as f64;
    let dt = t - s;
    let grad_sum = |sl: &KernelSlice, l: i64| -> (f64, f64) {
        let mut sum = 0.0;
        let mut sup: f64 = 0.0;
        for d in 0..n {
            let g = nf * (sl.k[wrap(d as i64 - l, n)] - sl.k[d]);
            sum += g.abs();
            sup = sup.max(g.abs());
        }
        (sum, sup)
    };
    let mut rows = Vec::new();
    for &l in l_list {
        let (sum, sup) = grad_sum(&slice, l);
        let pred_sum = dt.powf(-0.5) * l.abs() as f64;
        let pred_sup = l.abs() as f64 / (nf * dt);
        rows.push(GradientScalingRow {
            l,
            grad_sum: sum,
            grad_sup: sup,
            sum_ratio: sum / pred_sum,
            sup_ratio: sup / pred_sup,
        });
    }
    let mut moment = 0.0;
    for d in 0..n {
        let disp = torus_dist(wrap(d as i64 - slice.offset, n), 0, n) as f64;
        moment += slice.k[d] * disp * disp / (nf * nf);
    }
    let moment_pred = dt + 1.0 / (nf * nf);
    let l_ref = 1;
    let (sum_full, _) = grad_sum(&slice, l_ref);
    let (sum_half, _) = grad_sum(&half, l_ref);
    Ok(RegularityReport {
        n,
        dt_window: dt,
        rows,
        moment_p2: moment,
        moment_ratio: moment / moment_pred,
        halving_factor: sum_half / sum_full,
    })
}

/// Periodic heat kernel on the unit torus for the operator
/// `d/dt = alpha_bar(t) d^2/dx^2`, by the method of images. The image count
/// is chosen so the truncated tail is below 1e-14.
pub fn continuum_kernel(cache: &CoefficientCache, s: f64, t: f64, x: f64, y: f64) -> f64 {
    assert!(t > s);
    let v = 2.0 * cache.int_alpha(s, t);
    let sd = v.sqrt();
    let k_max = (9.0 * sd).ceil() as i64 + 2;
    let norm = 1.0 / (2.0 * std::f64::consts::PI * v).sqrt();
    let mut acc = 0.0;
    for k in -k_max..=k_max {
        let d = x - y + k as f64;
        acc += norm * (-d * d / (2.0 * v)).exp();
    }
    acc
}

#[derive(Debug, Clone, Serialize)]
pub struct GapPoint {
    pub n: usize,
    pub l2_gap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GapReport {
    pub s: f64,
    pub t: f64,
    pub points: Vec<GapPoint>,
    pub fitted_exponent: f64,
}

/// L2 distance between the continuum kernel and the rescaled lattice kernel
/// (piecewise-constant extension), at macroscopic window `[s, t]`, for one N.
pub fn discrete_continuum_gap(cache: &CoefficientCache, n: usize, s: f64, t: f64) -> Result<f64> {
    let charac = Characteristic::build(cache, n, t + 1e-9)?;
    let engine = KernelEngine::new(n, cache, &charac);
    let slice = engine.build(s, t)?;
    let nf = n as f64;
    // continuum reference point x = 0 corresponds to lattice site 0
    let (gl_x, gl_w) = crate::ensemble::gauss_legendre_pub(8);
    let mut acc = 0.0;
    for j in 0..n {
        let c = nf * slice.k[wrap(j as i64 + slice.offset, n)];
        let y0 = (j as f64 - 0.5) / nf;
        let y1 = (j as f64 + 0.5) / nf;
        let halfw = 0.5 * (y1 - y0);
        let mid = 0.5 * (y0 + y1);
        for (z, w) in gl_x.iter().zip(&gl_w) {
            let y = mid + halfw * z;
            let diff = continuum_kernel(cache, s, t, 0.0, y) - c;
            acc += w * halfw * diff * diff;
        }
    }
    Ok(acc.sqrt())
}

/// Gap curve over several N at fixed macroscopic window, with the fitted
/// N-exponent of the decay.
pub fn gap_curve(cache: &CoefficientCache, ns: &[usize], s: f64, t: f64) -> Result<GapReport> {
    let mut points = Vec::new();
    for &n in ns {
        points.push(GapPoint {
            n,
            l2_gap: discrete_continuum_gap(cache, n, s, t)?,
        });
    }
    let xs: Vec<f64> = points.iter().map(|p| (p.n as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.l2_gap.ln()).collect();
    let (slope, _) = crate::bg::ols_slope(&xs, &ys);
    Ok(GapReport {
        s,
        t,
        points,
        fitted_exponent: slope,
    })
}
