//! Euler-Maruyama time stepping for the conservative charge-field SDE on the
//! discrete torus, the integrated current at a reference site, and the
//! localized dynamics used for speed-of-propagation experiments.

use crate::ensemble::sample_canonical;
use crate::error::{Error, Result};
use crate::noise::NoiseTape;
use crate::potential::Potential;
use crate::wrap;
use rand::{Rng, SeedableRng};
use serde::Serialize;

/// Stability constant: dt_max = c_stab / (4 * c_hi * N^2).
pub const C_STAB_DEFAULT: f64 = 0.5;

pub fn dt_max(pot: &Potential, n: usize, c_stab: f64) -> f64 {
    c_stab / (4.0 * pot.c_hi() * (n * n) as f64)
}

/// All four discrete differentials of a field on the torus:
/// forward and backward gradients, their difference, and the Laplacian.
pub fn discrete_gradients(phi: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = phi.len();
    let mut fwd = vec![0.0; n];
    let mut bwd = vec![0.0; n];
    let mut asym = vec![0.0; n];
    let mut lap = vec![0.0; n];
    for x in 0..n {
        let xp = if x + 1 == n { 0 } else { x + 1 };
        let xm = if x == 0 { n - 1 } else { x - 1 };
        fwd[x] = phi[xp] - phi[x];
        bwd[x] = phi[xm] - phi[x];
        asym[x] = phi[xp] - phi[xm];
        lap[x] = phi[xp] + phi[xm] - 2.0 * phi[x];
    }
    (fwd, bwd, asym, lap)
}

/// Drift of the charge field: `N^2 Lap U'(t,U) + N^(3/2) grad_a U'(t,U)`.
pub fn drift(pot: &Potential, t: f64, u: &[f64]) -> Vec<f64> {
    let n = u.len();
    let nn = (n * n) as f64;
    let n32 = (n as f64).powf(1.5);
    let w: Vec<f64> = u.iter().map(|&v| pot.du(t, v)).collect();
    let mut out = vec![0.0; n];
    for x in 0..n {
        let xp = if x + 1 == n { 0 } else { x + 1 };
        let xm = if x == 0 { n - 1 } else { x - 1 };
        out[x] = nn * (w[xp] + w[xm] - 2.0 * w[x]) + n32 * (w[xp] - w[xm]);
    }
    out
}

#[derive(Debug, Clone)]
pub struct LatticeState {
    pub n: usize,
    pub t: f64,
    pub u: Vec<f64>,
    /// Integrated current at the reference site 0.
    pub j0: f64,
    pub total_charge: f64,
}

impl LatticeState {
    pub fn new(u: Vec<f64>) -> Self {
        let n = u.len();
        let total_charge = kahan_sum(&u);
        Self {
            n,
            t: 0.0,
            u,
            j0: 0.0,
            total_charge,
        }
    }

    /// Reconstruct the full current from its reference value and the
    /// gradient relation `J(x) = J(x-1) + N^{-1/2} U(x)`.
    pub fn current(&self) -> Vec<f64> {
        let inv_sqrt_n = 1.0 / (self.n as f64).sqrt();
        let mut j = vec![0.0; self.n];
        j[0] = self.j0;
        for x in 1..self.n {
            j[x] = j[x - 1] + inv_sqrt_n * self.u[x];
        }
        j
    }

    pub fn charge_sum(&self) -> f64 {
        kahan_sum(&self.u)
    }
}

pub fn kahan_sum(v: &[f64]) -> f64 {
    let mut s = 0.0;
    let mut c = 0.0;
    for &x in v {
        let y = x - c;
        let t = s + y;
        c = (t - s) - y;
        s = t;
    }
    s
}

/// One Euler-Maruyama step. `xi` holds one standard normal per site; the
/// Brownian increment is `xi * sqrt(dt)`. The current at the reference site
/// reuses the same tape entry as the field update there.
pub fn step(
    state: &mut LatticeState,
    pot: &Potential,
    dt: f64,
    xi: &[f64],
    c_stab: f64,
) -> Result<()> {
    let n = state.n;
    let bound = dt_max(pot, n, c_stab);
    if dt > bound * (1.0 + 1e-12) {
        return Err(Error::StabilityViolation { dt, dt_max: bound });
    }
    let t = state.t;
    let nf = n as f64;
    let n32 = nf.powf(1.5);
    let sqrt_dt = dt.sqrt();
    let sqrt2 = std::f64::consts::SQRT_2;
    let d = drift(pot, t, &state.u);
    // current update at site 0 uses the pre-step field
    let du0 = pot.du(t, state.u[0]);
    let du1 = pot.du(t, state.u[1 % n]);
    state.j0 += (n32 * (du1 - du0) + nf * (du0 + du1)) * dt + sqrt2 * nf.sqrt() * xi[0] * sqrt_dt;
    for x in 0..n {
        let xm = if x == 0 { n - 1 } else { x - 1 };
        // -sqrt(2) N (dB(x-1) - dB(x))
        let noise = -sqrt2 * nf * (xi[xm] - xi[x]) * sqrt_dt;
        state.u[x] += d[x] * dt + noise;
    }
    state.t += dt;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum InitialData {
    Canonical,
    Flat,
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub n: usize,
    pub t_final: f64,
    pub c_stab: f64,
    pub record_every: usize,
    pub initial: InitialData,
    pub canonical_sweeps: usize,
}

impl SimConfig {
    pub fn new(n: usize, t_final: f64) -> Self {
        Self {
            n,
            t_final,
            c_stab: C_STAB_DEFAULT,
            record_every: 64,
            initial: InitialData::Canonical,
            canonical_sweeps: 50,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub t: f64,
    pub u: Vec<f64>,
    pub j0: f64,
}

#[derive(Debug, Clone)]
pub struct LatticeTrajectory {
    pub n: usize,
    pub dt: f64,
    pub snapshots: Vec<Snapshot>,
    pub tape_id: crate::noise::TapeId,
}

impl LatticeTrajectory {
    pub fn snapshot_at(&self, t: f64) -> Result<&Snapshot> {
        self.snapshots
            .iter()
            .find(|s| (s.t - t).abs() < 1e-12)
            .ok_or(Error::SnapshotNotRecorded { t })
    }

    /// Reconstructed current of a snapshot.
    pub fn current_of(&self, snap: &Snapshot) -> Vec<f64> {
        let inv_sqrt_n = 1.0 / (self.n as f64).sqrt();
        let mut j = vec![0.0; self.n];
        j[0] = snap.j0;
        for x in 1..self.n {
            j[x] = j[x - 1] + inv_sqrt_n * snap.u[x];
        }
        j
    }
}

/// Draw initial data: an exact canonical sample of density zero, or the flat
/// zero field for debugging.
pub fn initial_field<R: Rng>(
    pot: &Potential,
    config: &SimConfig,
    rng: &mut R,
) -> Vec<f64> {
    match config.initial {
        InitialData::Flat => vec![0.0; config.n],
        InitialData::Canonical => {
            let mut u = sample_canonical(pot, 0.0, 0.0, config.n, config.canonical_sweeps, rng);
            // drive the mean to exact zero (pair moves preserve it afterwards)
            let mean = kahan_sum(&u) / config.n as f64;
            for v in u.iter_mut() {
                *v -= mean;
            }
            u
        }
    }
}

/// Run the SDE over `[0, t_final]`, recording snapshots at the configured
/// cadence (and always the final state). The tape is consumed one slice per
/// step and can be replayed by the coupled reference process.
pub fn simulate(
    pot: &Potential,
    config: &SimConfig,
    init: Vec<f64>,
    tape: &mut NoiseTape,
) -> Result<LatticeTrajectory> {
    assert_eq!(init.len(), config.n);
    assert_eq!(tape.n_sites(), config.n);
    let dt = dt_max(pot, config.n, config.c_stab);
    let steps = if config.t_final > 0.0 {
        (config.t_final / dt).ceil() as usize
    } else {
        0
    };
    let dt = if steps > 0 { config.t_final / steps as f64 } else { dt };
    let mut state = LatticeState::new(init);
    let mut snapshots = vec![Snapshot {
        t: 0.0,
        u: state.u.clone(),
        j0: state.j0,
    }];
    for k in 1..=steps {
        let xi = tape.next_slice().to_vec();
        step(&mut state, pot, dt, &xi, config.c_stab)?;
        state.t = k as f64 * dt;
        if k % config.record_every == 0 || k == steps {
            snapshots.push(Snapshot {
                t: state.t,
                u: state.u.clone(),
                j0: state.j0,
            });
        }
    }
    Ok(LatticeTrajectory {
        n: config.n,
        dt,
        snapshots,
        tape_id: tape.id(),
    })
}

/// State of the localized dynamics on an interval with its own periodic
/// boundary, coupled to the full system through shared tape entries.
#[derive(Debug, Clone)]
pub struct LocalizedState {
    /// absolute torus coordinate of the leftmost interval site
    pub start: i64,
    pub u: Vec<f64>,
    pub t: f64,
}

/// Same Euler scheme as `step`, with interval-periodic gradients; the noise
/// slice is the full-torus slice, indexed at the interval's absolute sites.
pub fn step_localized(
    lstate: &mut LocalizedState,
    pot: &Potential,
    n_full: usize,
    dt: f64,
    xi_full: &[f64],
    c_stab: f64,
) -> Result<()> {
    let k = lstate.u.len();
    let bound = dt_max(pot, n_full, c_stab);
    if dt > bound * (1.0 + 1e-12) {
        return Err(Error::StabilityViolation { dt, dt_max: bound });
    }
    let t = lstate.t;
    let nf = n_full as f64;
    let nn = nf * nf;
    let n32 = nf.powf(1.5);
    let sqrt_dt = dt.sqrt();
    let sqrt2 = std::f64::consts::SQRT_2;
    let w: Vec<f64> = lstate.u.iter().map(|&v| pot.du(t, v)).collect();
    let mut new_u = lstate.u.clone();
    for i in 0..k {
        let ip = if i + 1 == k { 0 } else { i + 1 };
        let im = if i == 0 { k - 1 } else { i - 1 };
        let d = nn * (w[ip] + w[im] - 2.0 * w[i]) + n32 * (w[ip] - w[im]);
        let xi_here = xi_full[wrap(lstate.start + i as i64, n_full)];
        let xi_left = xi_full[wrap(lstate.start + im as i64, n_full)];
        let noise = -sqrt2 * nf * (xi_left - xi_here) * sqrt_dt;
        // grouped exactly as in `step` so a full-torus interval reproduces
        // the global update bitwise
        new_u[i] = lstate.u[i] + (d * dt + noise);
    }
    lstate.u = new_u;
    lstate.t += dt;
    Ok(())
}

/// Width of the localized interval for horizon `horizon` and inner interval
/// length `inner_len`: `floor(N^gamma * (N sqrt(horizon) + N^{3/2} horizon + inner_len))`
/// added on each side.
pub fn localization_margin(n: usize, horizon: f64, inner_len: usize, gamma: f64) -> usize {
    let nf = n as f64;
    (nf.powf(gamma) * (nf * horizon.sqrt() + nf.powf(1.5) * horizon + inner_len as f64)).floor()
        as usize
}

#[derive(Debug, Clone, Serialize)]
pub struct LocalizationOutcome {
    pub seed: u64,
    /// sup over monitored times and the widened inner interval
    pub sup_diff: f64,
    /// same coupling with the margin collapsed to the inner interval
    pub sup_diff_no_buffer: f64,
}

#[derive(Debug, Clone)]
pub struct LocalizationConfig {
    pub n: usize,
    pub inner_len: usize,
    pub horizon: f64,
    pub gamma: f64,
    pub c_stab: f64,
    pub seeds: Vec<u64>,
    pub canonical_sweeps: usize,
}

/// Couple the full dynamics with the localized dynamics on shared noise and
/// identical initial data on the localized interval; report the sup
/// difference over the widened inner interval, plus the zero-buffer
/// negative control.
pub fn localization_experiment(
    pot: &Potential,
    config: &LocalizationConfig,
) -> Result<Vec<LocalizationOutcome>> {
    let n = config.n;
    let margin = localization_margin(n, config.horizon, config.inner_len, config.gamma);
    let widened = config.inner_len + 20;
    let loc_len = config.inner_len + 2 * margin;
    if loc_len >= n {
        return Err(Error::LocalizationTooWide { needed: loc_len, n });
    }
    if margin < 10 {
        return Err(Error::Config(format!(
            "localization margin {margin} must exceed the monitored widening of 10"
        )));
    }
    let inner_start: i64 = 0;
    use rayon::prelude::*;
    let out: Result<Vec<LocalizationOutcome>> = config.seeds.par_iter().map(|&seed| {
        let mut tape = crate::noise::tape_for(seed, 0, n);
        let mut init_rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed ^ 0x9e3779b97f4a7c15);
        let sim = SimConfig {
            n,
            t_final: config.horizon,
            c_stab: config.c_stab,
            record_every: 1,
            initial: InitialData::Canonical,
            canonical_sweeps: config.canonical_sweeps,
        };
        let init = initial_field(pot, &sim, &mut init_rng);
        let run =
            |margin: usize, tape: &mut NoiseTape| -> Result<f64> {
                let loc_len = config.inner_len + 2 * margin;
                let start = inner_start - margin as i64;
                let mut full = LatticeState::new(init.clone());
                let mut loc = LocalizedState {
                    start,
                    u: (0..loc_len)
                        .map(|i| init[wrap(start + i as i64, n)])
                        .collect(),
                    t: 0.0,
                };
                let dt0 = dt_max(pot, n, config.c_stab);
                let steps = (config.horizon / dt0).ceil() as usize;
                let dt = config.horizon / steps as f64;
                let mut sup: f64 = 0.0;
                for _ in 0..steps {
                    let xi = tape.next_slice().to_vec();
                    step(&mut full, pot, dt, &xi, config.c_stab)?;
                    step_localized(&mut loc, pot, n, dt, &xi, config.c_stab)?;
                    let lo = inner_start - (widened as i64 - config.inner_len as i64) / 2;
                    for k in 0..widened as i64 {
                        let x_abs = lo + k;
                        let li = x_abs - start;
                        if li < 0 || li >= loc_len as i64 {
                            continue;
                        }
                        let d = (full.u[wrap(x_abs, n)] - loc.u[li as usize]).abs();
                        sup = sup.max(d);
                    }
                }
                Ok(sup)
            };
        let sup_diff = run(margin, &mut tape)?;
        let mut tape2 = tape.replay();
        let sup_diff_no_buffer = run(0, &mut tape2)?;
        Ok(LocalizationOutcome {
            seed,
            sup_diff,
            sup_diff_no_buffer,
        })
    }).collect();
    out
}
