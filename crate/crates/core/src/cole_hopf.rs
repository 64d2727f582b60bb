//! Characteristic shift, renormalized height function, exponentiated
//! (Gartner) transform, smoothing, and the regularity / a-priori monitors.

use crate::ensemble::CoefficientCache;
use crate::error::{Error, Result};
use crate::heat_kernel::KernelEngine;
use crate::lattice::{LatticeTrajectory, Snapshot};
use crate::{torus_dist, wrap};
use serde::Serialize;

/// Integer-crossing times of the cumulative drift
/// `D(t) = 2 N^{3/2} int_0^t alpha_bar`, and the induced site shift.
///
/// The number of crossings in a window is what the kernel factorization
/// uses as its offset; counting crossings (rather than flooring the window
/// integral directly) makes offsets add exactly over adjacent windows.
#[derive(Debug, Clone)]
pub struct Characteristic {
    pub n: usize,
    pub t_max: f64,
    /// sorted crossing times in (0, t_max]
    pub jumps: Vec<f64>,
}

impl Characteristic {
    /// Locate every integer crossing of the cumulative drift by bisection
    /// on a monotone grid. The scan grid is refined automatically so D
    /// changes by less than 1/2 per cell.
    pub fn build(cache: &CoefficientCache, n: usize, t_max: f64) -> Result<Self> {
        assert!(t_max > 0.0);
        let scale = 2.0 * (n as f64).powf(1.5);
        let d = |t: f64| scale * cache.int_alpha(0.0, t);
        let total = d(t_max);
        let cells = ((total / 0.4).ceil() as usize).max(64);
        let mut jumps = Vec::with_capacity(total as usize + 1);
        let mut t_lo = 0.0;
        let mut next_k = 1.0;
        for c in 1..=cells {
            let t_hi = t_max * c as f64 / cells as f64;
            let d_hi = d(t_hi);
            while next_k <= d_hi {
                // bisect D(t) = next_k on [t_lo, t_hi]
                let (mut a, mut b) = (t_lo, t_hi);
                for _ in 0..64 {
                    let m = 0.5 * (a + b);
                    if d(m) < next_k {
                        a = m;
                    } else {
                        b = m;
                    }
                }
                jumps.push(0.5 * (a + b));
                next_k += 1.0;
            }
            t_lo = t_hi;
        }
        Ok(Self { n, t_max, jumps })
    }

    /// Site shift accumulated on (0, t]: the number of crossings so far.
    pub fn shift_of(&self, t: f64) -> i64 {
        self.jumps.partition_point(|&j| j <= t) as i64
    }

    /// Crossings in the window (s, t].
    pub fn offset(&self, s: f64, t: f64) -> i64 {
        self.shift_of(t) - self.shift_of(s)
    }

    /// Crossing times inside (s, t].
    pub fn jumps_in(&self, s: f64, t: f64) -> &[f64] {
        let a = self.jumps.partition_point(|&j| j <= s);
        let b = self.jumps.partition_point(|&j| j <= t);
        &self.jumps[a..b]
    }
}

/// Height field at a fixed time: the reconstructed current evaluated in the
/// moving frame, minus the accumulated counter-term.
#[derive(Debug, Clone)]
pub struct HeightField {
    pub t: f64,
    pub h: Vec<f64>,
    pub renorm_integral: f64,
}

/// Build the height field from a recorded snapshot.
pub fn height(
    traj: &LatticeTrajectory,
    charac: &Characteristic,
    cache: &CoefficientCache,
    t: f64,
) -> Result<HeightField> {
    let snap = traj.snapshot_at(t)?;
    Ok(height_of_snapshot(traj, snap, charac, cache))
}

pub fn height_of_snapshot(
    traj: &LatticeTrajectory,
    snap: &Snapshot,
    charac: &Characteristic,
    cache: &CoefficientCache,
) -> HeightField {
    let n = traj.n;
    let j = traj.current_of(snap);
    let shift = charac.shift_of(snap.t);
    let renorm_integral = cache.int_renorm(snap.t);
    let h = (0..n)
        .map(|x| j[wrap(x as i64 - shift, n)] - renorm_integral)
        .collect();
    HeightField {
        t: snap.t,
        h,
        renorm_integral,
    }
}

/// Exponentiated height `Z = exp(lambda(t) h)`. Overflow of the exponent is
/// an error (a regularity blow-up signal), never a silent saturation.
pub fn gartner(hf: &HeightField, cache: &CoefficientCache) -> Result<Vec<f64>> {
    let lambda = cache.lambda(hf.t);
    hf.h
        .iter()
        .map(|&h| {
            let e = lambda * h;
            if e.abs() > 700.0 {
                Err(Error::GartnerOverflow { magnitude: e.abs() })
            } else {
                Ok(e.exp())
            }
        })
        .collect()
}

/// Unshifted variant built from the current itself:
/// `G = exp(lambda(t) (J - int_0^t R))`.
pub fn gartner_unshifted(j: &[f64], t: f64, cache: &CoefficientCache) -> Result<Vec<f64>> {
    let lambda = cache.lambda(t);
    let r = cache.int_renorm(t);
    j.iter()
        .map(|&jv| {
            let e = lambda * (jv - r);
            if e.abs() > 700.0 {
                Err(Error::GartnerOverflow { magnitude: e.abs() })
            } else {
                Ok(e.exp())
            }
        })
        .collect()
}

/// Exact Holder-1/2 seminorm of the height over all site pairs, in geodesic
/// distance, and the flag against the `N^gamma_reg` level.
pub fn hoelder_monitor(h: &[f64], gamma_reg: f64) -> (f64, bool) {
    let n = h.len();
    let nf = n as f64;
    let mut semi: f64 = 0.0;
    for x in 0..n {
        for y in (x + 1)..n {
            let d = torus_dist(x, y, n) as f64;
            let v = (h[x] - h[y]).abs() / (nf.sqrt() * d.sqrt());
            semi = semi.max(v);
        }
    }
    (semi, semi >= nf.powf(gamma_reg))
}

#[derive(Debug, Clone, Serialize)]
pub struct ApMonitor {
    pub sup_norm: f64,
    pub inf_value: f64,
    pub trigger_value: f64,
    pub exceeded: bool,
}

/// Track sup norms of the transform and its smoothing together with their
/// inverses; the trigger fires when `log N <= max(|Z|,|S|) + max(|1/Z|,|1/S|)`.
pub fn ap_monitor(z: &[f64], s: &[f64], gamma_ap: f64) -> ApMonitor {
    let n = z.len() as f64;
    let sup = |v: &[f64]| v.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let inf = |v: &[f64]| v.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let sup_z = sup(z).max(sup(s));
    let inf_z = inf(z).min(inf(s));
    let inv = if inf_z > 0.0 { 1.0 / inf_z } else { f64::INFINITY };
    let trigger_value = sup_z + inv;
    let _ = gamma_ap;
    ApMonitor {
        sup_norm: sup_z,
        inf_value: inf_z,
        trigger_value,
        exceeded: trigger_value >= n.ln(),
    }
}

/// Forward-smoothed transform: the kernel over `[t, t + span]` applied to Z.
pub fn smoothed_gartner(
    z: &[f64],
    engine: &KernelEngine,
    t: f64,
    span: f64,
) -> Result<Vec<f64>> {
    assert!(span > 0.0, "smoothing span must be positive");
    Ok(engine.build(t, t + span)?.apply(z))
}
