//! Centering taxonomy for local statistics of the tilted ensembles, decay of
//! canonical block expectations, and space-time averaging diagnostics.

use crate::cole_hopf::Characteristic;
use crate::ensemble::{
    self, gc_expect, sigma_derivative, CanonicalMarginal, CoefficientCache, GcMeasure,
};
use crate::error::Result;
use crate::lattice::LatticeTrajectory;
use crate::potential::Potential;
use crate::wrap;
use rand::Rng;
use serde::Serialize;

/// Centering depth: how many density-derivatives of the expectation vanish
/// at zero density (one = mean only, two = mean and slope, three = mean,
/// slope and curvature).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Centering {
    None,
    Mean,
    Linear,
    Quadratic,
}

impl Centering {
    /// Decay exponent j in the block-average law `l^{-j/2}`.
    pub fn decay_index(self) -> Option<u32> {
        match self {
            Centering::None => None,
            Centering::Mean => Some(1),
            Centering::Linear => Some(2),
            Centering::Quadratic => Some(3),
        }
    }
}

/// The named local statistics entering the transform's source terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StatKind {
    /// drift minus its linear and quadratic corrections (expected depth 3)
    CorrectedFlux,
    /// drift minus its linear response (expected depth 2)
    LinearCorrectedFlux,
    /// normalized quadratic fluctuation (expected depth 1)
    QuadraticFluct,
    /// cubic counter-term combination (expected depth 1)
    CubicCounterterm,
    /// centered cubic flux (expected depth 1)
    CenteredCubicFlux,
    /// raw drift response (expected depth 1, with order-one linear slope;
    /// the clean probe of the square-root block-average law, since the even
    /// statistics have parity-suppressed linear response at small coupling)
    DriftResponse,
}

impl StatKind {
    pub fn expected(self) -> Centering {
        match self {
            StatKind::CorrectedFlux => Centering::Quadratic,
            StatKind::LinearCorrectedFlux => Centering::Linear,
            _ => Centering::Mean,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            StatKind::CorrectedFlux => "corrected_flux",
            StatKind::LinearCorrectedFlux => "linear_corrected_flux",
            StatKind::QuadraticFluct => "quadratic_fluct",
            StatKind::CubicCounterterm => "cubic_counterterm",
            StatKind::CenteredCubicFlux => "centered_cubic_flux",
            StatKind::DriftResponse => "drift_response",
        }
    }
}

/// A statistic with its time-t coefficients frozen in, ready for pointwise
/// evaluation. Coefficients are computed directly (not read off a spline)
/// so the classification residuals carry quadrature accuracy only.
pub struct FrozenStat {
    pub kind: StatKind,
    pub t: f64,
    f: Box<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl FrozenStat {
    pub fn eval(&self, u: f64) -> f64 {
        (self.f)(u)
    }

    /// Wrap an arbitrary single-site evaluator under a statistic label.
    pub fn custom<F>(kind: StatKind, t: f64, f: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            kind,
            t,
            f: Box::new(f),
        }
    }
}

/// Freeze a statistic at time `t` for the given potential.
pub fn freeze(pot: &Potential, kind: StatKind, t: f64) -> Result<FrozenStat> {
    let coeffs = ensemble::homogenized(pot, t)?;
    let (alpha, lambda, renorm) = (coeffs.alpha_bar, coeffs.lambda, coeffs.renorm);
    let p = pot.clone();
    let f: Box<dyn Fn(f64) -> f64 + Send + Sync> = match kind {
        StatKind::CorrectedFlux => Box::new(move |u| {
            p.du(t, u) - alpha * u - 0.5 * lambda * (p.du(t, u) * u - 1.0)
        }),
        StatKind::LinearCorrectedFlux => Box::new(move |u| p.du(t, u) - alpha * u),
        StatKind::DriftResponse => Box::new(move |u| p.du(t, u)),
        StatKind::QuadraticFluct => Box::new(move |u| alpha * u * u - 1.0),
        StatKind::CubicCounterterm => {
            let m0 = GcMeasure::with_mean(pot, 0.0, t, ensemble::GC_TOL)?;
            let e_du_u3 = m0.expect(|u| p.du(t, u) * u * u * u)?;
            let l4 = lambda.powi(4);
            Box::new(move |u| {
                l4 / 12.0 * e_du_u3 + lambda.powi(3) * alpha / 6.0 * u * u * u - lambda * renorm
            })
        }
        StatKind::CenteredCubicFlux => {
            let m0 = GcMeasure::with_mean(pot, 0.0, t, ensemble::GC_TOL)?;
            let e_du_u3 = m0.expect(|u| p.du(t, u) * u * u * u)?;
            let l4 = lambda.powi(4);
            Box::new(move |u| l4 / 12.0 * (p.du(t, u) * u * u * u - e_du_u3))
        }
    };
    Ok(FrozenStat { kind, t, f })
}

#[derive(Debug, Clone, Serialize)]
pub struct Classification {
    pub kind: StatKind,
    pub t: f64,
    pub class: Centering,
    /// residuals of the depth-0, depth-1, depth-2 vanishing conditions
    pub residuals: [f64; 3],
}

/// Compute the three vanishing conditions for a frozen statistic and return
/// the deepest class whose residuals are below `tol`.
pub fn classify(pot: &Potential, stat: &FrozenStat, tol: f64) -> Result<Classification> {
    let t = stat.t;
    let r0 = gc_expect(pot, 0.0, t, |u| stat.eval(u))?.abs();
    let r1 = sigma_derivative(pot, 0.0, t, |u| stat.eval(u), 1)?.abs();
    let r2 = sigma_derivative(pot, 0.0, t, |u| stat.eval(u), 2)?.abs();
    let class = if r0 >= tol {
        Centering::None
    } else if r1 >= tol {
        Centering::Mean
    } else if r2 >= tol {
        Centering::Linear
    } else {
        Centering::Quadratic
    };
    Ok(Classification {
        kind: stat.kind,
        t,
        class,
        residuals: [r0, r1, r2],
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TaxonomyReport {
    pub entries: Vec<Classification>,
    pub pass: bool,
}

/// Verify the full membership table on a time grid: the corrected flux is
/// quadratically centered, the linear-corrected flux linearly centered, and
/// the three remaining statistics mean-centered.
pub fn verify_taxonomy(pot: &Potential, t_grid: &[f64], tol: f64) -> Result<TaxonomyReport> {
    let kinds = [
        StatKind::CorrectedFlux,
        StatKind::LinearCorrectedFlux,
        StatKind::QuadraticFluct,
        StatKind::CubicCounterterm,
        StatKind::CenteredCubicFlux,
        StatKind::DriftResponse,
    ];
    let mut entries = Vec::new();
    let mut pass = true;
    for &t in t_grid {
        for kind in kinds {
            let stat = freeze(pot, kind, t)?;
            let c = classify(pot, &stat, tol)?;
            // membership requirement: at least the expected depth
            let ok = match kind.expected() {
                Centering::Quadratic => c.class == Centering::Quadratic,
                Centering::Linear => {
                    c.class == Centering::Linear || c.class == Centering::Quadratic
                }
                Centering::Mean => c.class != Centering::None,
                Centering::None => true,
            };
            pass &= ok;
            entries.push(c);
        }
    }
    Ok(TaxonomyReport { entries, pass })
}

/// Ordinary least squares slope of y on x with its standard error.
pub fn ols_slope(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|&v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(&a, &b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    if x.len() <= 2 {
        return (slope, 0.0);
    }
    let intercept = my - slope * mx;
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(&a, &b)| {
            let r = b - (intercept + slope * a);
            r * r
        })
        .sum();
    let s2 = ss_res / (n - 2.0);
    (slope, (s2 / sxx).sqrt())
}

#[derive(Debug, Clone, Serialize)]
pub struct BlockDecayRow {
    pub l: usize,
    pub mean_abs: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BlockDecayReport {
    pub kind: StatKind,
    pub t: f64,
    pub rows: Vec<BlockDecayRow>,
    pub fitted_slope: f64,
    pub slope_stderr: f64,
    pub expected_slope: f64,
    pub inconclusive: bool,
}

pub struct BlockDecayParams {
    pub draws: usize,
    pub window: usize,
    pub sweeps: usize,
}

impl Default for BlockDecayParams {
    fn default() -> Self {
        Self {
            draws: 96,
            window: 160,
            sweeps: 60,
        }
    }
}

/// Decay of the canonical block expectation of a centered statistic with
/// block length. Fields are drawn from the zero-density canonical ensemble
/// on a window, block densities are read off nested blocks, and the exact
/// single-site marginal evaluates the block expectation; the log-log slope
/// against block length is fitted by least squares.
pub fn block_decay<R: Rng>(
    pot: &Potential,
    kind: StatKind,
    t: f64,
    l_list: &[usize],
    params: &BlockDecayParams,
    rng: &mut R,
) -> Result<BlockDecayReport> {
    let stat = freeze(pot, kind, t)?;
    let max_l = *l_list.iter().max().unwrap();
    assert!(params.window >= 2 * max_l, "window must dominate the largest block");
    let mut marginal = CanonicalMarginal::new(pot, t, max_l)?;
    let mut values: Vec<Vec<f64>> = vec![Vec::with_capacity(params.draws); l_list.len()];
    for _ in 0..params.draws {
        let field = ensemble::sample_canonical(pot, 0.0, t, params.window, params.sweeps, rng);
        for (i, &l) in l_list.iter().enumerate() {
            let sigma = ensemble::block_density(&field, (params.window / 2) as i64, l, true);
            let v = marginal.expect(l, sigma, |u| stat.eval(u))?;
            values[i].push(v.abs());
        }
    }
    let mut rows = Vec::new();
    for (i, &l) in l_list.iter().enumerate() {
        let n = values[i].len() as f64;
        let mean = values[i].iter().sum::<f64>() / n;
        let var = values[i].iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        rows.push(BlockDecayRow {
            l,
            mean_abs: mean,
            stderr: (var / n).sqrt(),
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| (r.l as f64).ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.mean_abs.max(1e-300).ln()).collect();
    let (slope, slope_se) = ols_slope(&xs, &ys);
    let inconclusive = rows
        .iter()
        .any(|r| r.stderr > 0.5 * r.mean_abs.abs().max(1e-300));
    let j = kind.expected().decay_index().unwrap_or(0) as f64;
    Ok(BlockDecayReport {
        kind,
        t,
        rows,
        fitted_slope: slope,
        slope_stderr: slope_se,
        expected_slope: -0.5 * j,
        inconclusive,
    })
}

/// Mixed space-time average of `stat * G^s` along a recorded trajectory:
/// `m` disjoint spatial shifts of the statistic's support and a trapezoid
/// average over the recorded times in `[s - tau, s]`, with the
/// exponentiated current's coupling constant frozen at time `s`.
#[allow(clippy::too_many_arguments)]
pub fn space_time_average<F>(
    traj: &LatticeTrajectory,
    charac: &Characteristic,
    cache: &CoefficientCache,
    stat: F,
    support_len: usize,
    m: usize,
    tau: f64,
    plus: bool,
    s: f64,
    y: i64,
) -> Result<f64>
where
    F: Fn(f64, f64) -> f64,
{
    let n = traj.n;
    let lambda_s = cache.lambda(s);
    let sign = if plus { 1i64 } else { -1i64 };
    let w = support_len.max(1) as i64;
    let snaps: Vec<&crate::lattice::Snapshot> = traj
        .snapshots
        .iter()
        .filter(|sn| sn.t >= s - tau - 1e-12 && sn.t <= s + 1e-12)
        .collect();
    assert!(!snaps.is_empty(), "no snapshots recorded in the averaging window");
    let eval_at = |sn: &crate::lattice::Snapshot| -> f64 {
        let j = traj.current_of(sn);
        let renorm = cache.int_renorm(sn.t);
        let shift = charac.shift_of(sn.t);
        let y_shifted = y - shift;
        let mut acc = 0.0;
        for k in 0..m as i64 {
            let x = wrap(y_shifted + sign * 2 * k * w, n);
            let g = (lambda_s * (j[x] - renorm)).exp();
            acc += stat(sn.t, sn.u[x]) * g;
        }
        acc / m as f64
    };
    if snaps.len() == 1 || tau == 0.0 {
        return Ok(eval_at(snaps.last().unwrap()));
    }
    // trapezoid over the recorded times
    let mut acc = 0.0;
    let mut span = 0.0;
    for pair in snaps.windows(2) {
        let dt = pair[1].t - pair[0].t;
        acc += 0.5 * dt * (eval_at(pair[0]) + eval_at(pair[1]));
        span += dt;
    }
    Ok(acc / span)
}

/// Equivalence-of-ensembles gap of the drift response over block lengths,
/// with the fitted log-log slope.
#[derive(Debug, Clone, Serialize)]
pub struct EnsembleGapReport {
    pub t: f64,
    pub rows: Vec<(usize, f64)>,
    pub fitted_slope: f64,
}

pub fn ensemble_gap_report(pot: &Potential, t: f64, lengths: &[usize]) -> Result<EnsembleGapReport> {
    let rows = ensemble::ensemble_gap_curve(pot, t, lengths)?;
    let xs: Vec<f64> = rows.iter().map(|&(l, _)| (l as f64).ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|&(_, g)| g.max(1e-300).ln()).collect();
    let (slope, _) = ols_slope(&xs, &ys);
    Ok(EnsembleGapReport {
        t,
        rows,
        fitted_slope: slope,
    })
}
