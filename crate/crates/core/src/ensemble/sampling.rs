//! Samplers: i.i.d. draws from the tilted single-site measure via a
//! precomputed quantile table (tail handled by rejection against the
//! log-concavity Gaussian envelope), and the sum-preserving pair-exchange
//! Gibbs sampler for the conditioned product measure.

use super::GcMeasure;
use crate::error::Result;
use crate::potential::Potential;
use rand::Rng;

const TABLE_BITS: u32 = 16;

/// Inverse-CDF sampler for the tilted single-site measure.
pub struct GcSampler {
    table: Vec<f64>,
    /// CDF mass left of the table, delegated to the tail branch.
    edge: f64,
    mode: f64,
    sd_env: f64,
    peak_exponent: f64,
    tilt: f64,
    t: f64,
    pot: Potential,
}

impl GcSampler {
    pub fn new(pot: &Potential, sigma: f64, t: f64) -> Result<Self> {
        let m = GcMeasure::with_mean(pot, sigma, t, 1e-11)?;
        let (lo, hi) = m.window();
        // Dense CDF grid, then quantiles at uniform mass spacing.
        let grid_n = 1usize << 17;
        let h = (hi - lo) / grid_n as f64;
        let mut cdf = Vec::with_capacity(grid_n + 1);
        cdf.push(0.0);
        let mut prev = m.density(lo);
        let mut acc = 0.0;
        for i in 1..=grid_n {
            let x = lo + i as f64 * h;
            let d = m.density(x);
            acc += 0.5 * (prev + d) * h;
            cdf.push(acc);
            prev = d;
        }
        let total = *cdf.last().unwrap();
        let table_n = 1usize << TABLE_BITS;
        let edge = 1.0 / table_n as f64;
        let mut table = Vec::with_capacity(table_n + 1);
        let mut j = 0usize;
        for k in 0..=table_n {
            let target = (edge + (1.0 - 2.0 * edge) * k as f64 / table_n as f64) * total;
            while j + 1 < cdf.len() && cdf[j + 1] < target {
                j += 1;
            }
            let c0 = cdf[j];
            let c1 = cdf[j + 1];
            let frac = if c1 > c0 { (target - c0) / (c1 - c0) } else { 0.0 };
            table.push(lo + (j as f64 + frac) * h);
        }
        let mode = 0.5 * (m.window().0 + m.window().1);
        let mode = {
            // mode of the exponent: U'(u) = tilt
            let mut u = mode;
            for _ in 0..60 {
                let step = (pot.du(t, u) - m.tilt) / pot.d2u(t, u);
                u -= step;
                if step.abs() < 1e-12 {
                    break;
                }
            }
            u
        };
        Ok(Self {
            table,
            edge,
            mode,
            sd_env: 1.0 / pot.c_lo().sqrt(),
            peak_exponent: m.tilt * mode - pot.u(t, mode),
            tilt: m.tilt,
            t,
            pot: pot.clone(),
        })
    }

    /// One draw. Interior mass is table lookup with linear interpolation;
    /// the two tail slivers fall back to envelope rejection.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.gen();
        if u < self.edge {
            return self.tail_sample(rng, false);
        }
        if u > 1.0 - self.edge {
            return self.tail_sample(rng, true);
        }
        let pos = (u - self.edge) / (1.0 - 2.0 * self.edge) * (self.table.len() - 1) as f64;
        let i = (pos as usize).min(self.table.len() - 2);
        let frac = pos - i as f64;
        self.table[i] + frac * (self.table[i + 1] - self.table[i])
    }

    pub fn sample_n<R: Rng>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        (0..n).map(|_| self.sample(rng)).collect()
    }

    // Exact rejection against exp{peak - c_lo (x-mode)^2 / 2}, restricted to
    // the tail side beyond the table edge (Marsaglia tail for the envelope).
    fn tail_sample<R: Rng>(&self, rng: &mut R, upper: bool) -> f64 {
        let bound = if upper {
            *self.table.last().unwrap()
        } else {
            self.table[0]
        };
        let a = ((bound - self.mode).abs() / self.sd_env).max(0.5);
        loop {
            // standard normal conditioned on > a
            let z = loop {
                let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
                let u2: f64 = rng.gen();
                let x = (a * a - 2.0 * u1.ln()).sqrt();
                if u2 * x <= a {
                    break x;
                }
            };
            let x = if upper {
                self.mode + z * self.sd_env
            } else {
                self.mode - z * self.sd_env
            };
            let log_env = self.peak_exponent - 0.5 * (x - self.mode).powi(2) / (self.sd_env * self.sd_env);
            let log_p = self.tilt * x - self.pot.u(self.t, x);
            let u3: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
            if u3.ln() <= log_p - log_env {
                return x;
            }
        }
    }
}

/// Pair-exchange Gibbs sampler on a discrete interval: the sum over the
/// interval is preserved by construction, so the configuration stays on
/// the charge hyperplane it started on.
pub struct CanonicalSampler {
    pot: Potential,
    pub sigma: f64,
    pub t: f64,
    pub u: Vec<f64>,
    pub moves: u64,
    grid_points: usize,
    half_width: f64,
}

impl CanonicalSampler {
    pub fn new(pot: &Potential, sigma: f64, t: f64, len: usize) -> Self {
        assert!(len >= 2, "canonical interval needs at least 2 sites");
        Self {
            pot: pot.clone(),
            sigma,
            t,
            u: vec![sigma; len],
            moves: 0,
            grid_points: 256,
            half_width: 10.0 / (2.0 * pot.c_lo()).sqrt(),
        }
    }

    /// Resample the pair `(i, j)` from the exact one-dimensional conditional
    /// of the product measure given `u_i + u_j`.
    fn pair_move<R: Rng>(&mut self, i: usize, j: usize, rng: &mut R) {
        let s = self.u[i] + self.u[j];
        let c = 0.5 * s;
        let m = self.grid_points;
        let h = 2.0 * self.half_width / m as f64;
        // log-density of v given the pair sum: -U(t,v) - U(t,s-v)
        let mut w = Vec::with_capacity(m + 1);
        let mut peak = f64::NEG_INFINITY;
        for k in 0..=m {
            let v = c - self.half_width + k as f64 * h;
            let e = -self.pot.u(self.t, v) - self.pot.u(self.t, s - v);
            peak = peak.max(e);
            w.push(e);
        }
        let mut cdf = Vec::with_capacity(m + 1);
        cdf.push(0.0);
        let mut acc = 0.0;
        let mut prev = (w[0] - peak).exp();
        for k in 1..=m {
            let d = (w[k] - peak).exp();
            acc += 0.5 * (prev + d);
            cdf.push(acc);
            prev = d;
        }
        let target = rng.gen::<f64>() * acc;
        let mut idx = cdf.partition_point(|&x| x < target);
        idx = idx.clamp(1, m);
        let (c0, c1) = (cdf[idx - 1], cdf[idx]);
        let frac = if c1 > c0 { (target - c0) / (c1 - c0) } else { 0.5 };
        let v = c - self.half_width + (idx as f64 - 1.0 + frac) * h;
        self.u[i] = v;
        self.u[j] = s - v;
        self.moves += 1;
    }

    /// One sweep = `len` random pair moves.
    pub fn sweep<R: Rng>(&mut self, rng: &mut R) {
        let n = self.u.len();
        for _ in 0..n {
            let i = rng.gen_range(0..n);
            let mut j = rng.gen_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            self.pair_move(i, j, rng);
        }
    }

    pub fn sweeps<R: Rng>(&mut self, count: usize, rng: &mut R) {
        for _ in 0..count {
            self.sweep(rng);
        }
    }
}

/// Draw one configuration of the conditioned product measure on an interval
/// of length `len`: initialize flat at `sigma`, then run `sweeps` sweeps.
pub fn sample_canonical<R: Rng>(
    pot: &Potential,
    sigma: f64,
    t: f64,
    len: usize,
    sweeps: usize,
    rng: &mut R,
) -> Vec<f64> {
    let mut s = CanonicalSampler::new(pot, sigma, t, len);
    s.sweeps(sweeps, rng);
    s.u
}
