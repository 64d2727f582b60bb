//! Canonical (conditioned product) expectations: low-dimensional tensor-grid
//! quadrature for tiny blocks, an exact single-site marginal for arbitrary
//! block length built from convolution powers of the zero-tilt density, and
//! the block-density local expectation evaluator.

use super::GcMeasure;
use crate::error::{Error, Result};
use crate::potential::Potential;
use rand::Rng;
use rustfft::{num_complex::Complex64, FftPlanner};

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration.
pub fn gauss_legendre_pub(n: usize) -> (Vec<f64>, Vec<f64>) {
    gauss_legendre(n)
}

fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j as f64 + 1.0) * z * p1 - j as f64 * p2) / (j as f64 + 1.0);
            }
            let dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                let dp = {
                    let (mut p0, mut p1) = (1.0, 0.0);
                    for j in 0..n {
                        let p2 = p1;
                        p1 = p0;
                        p0 = ((2.0 * j as f64 + 1.0) * z * p1 - j as f64 * p2) / (j as f64 + 1.0);
                    }
                    n as f64 * (z * p0 - p1) / (z * z - 1.0)
                };
                x[i] = z;
                w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
                break;
            }
        }
    }
    (x, w)
}

/// Direct quadrature of a canonical expectation over the charge hyperplane,
/// supported for blocks of length 2..=4. The last coordinate is eliminated
/// by the constraint; the remaining ones are integrated on a tensor grid.
pub fn canonical_expect_bruteforce<F>(
    pot: &Potential,
    sigma: f64,
    t: f64,
    len: usize,
    f: F,
) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    if !(2..=4).contains(&len) {
        return Err(Error::UnsupportedBlockSize { size: len });
    }
    let half = 11.0 / pot.c_lo().sqrt();
    let nodes = match len {
        2 => 320,
        3 => 144,
        _ => 72,
    };
    let (gx, gw) = gauss_legendre(nodes);
    let xs: Vec<f64> = gx.iter().map(|&z| sigma + half * z).collect();
    let ws: Vec<f64> = gw.iter().map(|&w| half * w).collect();
    let log_p0 = |u: f64| -pot.u(t, u);
    let total = sigma * len as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    let mut coords = vec![0.0; len];
    let dims = len - 1;
    let mut idx = vec![0usize; dims];
    'outer: loop {
        let mut weight = 1.0;
        let mut rest = total;
        for d in 0..dims {
            let v = xs[idx[d]];
            coords[d] = v;
            weight *= ws[idx[d]];
            rest -= v;
        }
        coords[dims] = rest;
        let mut e = 0.0;
        for &c in coords.iter() {
            e += log_p0(c);
        }
        let dens = e.exp() * weight;
        den += dens;
        num += dens * f(&coords);
        // advance multi-index
        for d in 0..dims {
            idx[d] += 1;
            if idx[d] < nodes {
                continue 'outer;
            }
            idx[d] = 0;
        }
        break;
    }
    if den <= 0.0 {
        return Err(Error::QuadratureNonConvergence {
            residual: f64::INFINITY,
            tol: 0.0,
        });
    }
    Ok(num / den)
}

/// Exact single-site marginal of the canonical ensemble on a block of
/// length `l`, for any `l` up to the configured maximum.
///
/// Conditioned on the block sum, a single coordinate has density
/// proportional to `p0(u) * g_{l-1}(sum - u)`, where `g_k` is the k-fold
/// convolution of the zero-tilt single-site density. The convolution powers
/// are computed spectrally on a fine grid once, then expectations follow by
/// trapezoid sums (the integrands decay fast, so the trapezoid rule is
/// effectively spectrally accurate).
pub struct CanonicalMarginal {
    t: f64,
    h: f64,
    /// zero-tilt single-site density sampled on `x = j*h`, `|x| <= l1`.
    p0: Vec<f64>,
    l1: f64,
    /// convolution powers on the FFT grid, keyed by power.
    powers: std::collections::HashMap<usize, Vec<f64>>,
    fft_size: usize,
    spectrum: Vec<Complex64>,
    pot: Potential,
}

impl CanonicalMarginal {
    pub fn new(pot: &Potential, t: f64, max_block: usize) -> Result<Self> {
        let h = 0.004;
        let sd = 1.0 / pot.c_lo().sqrt();
        let l1 = 14.0 * sd;
        // Zero-tilt measure, normalized; reuse the quadrature normalizer.
        let m = GcMeasure::with_tilt(pot, t, 0.0, 1e-12)?;
        let n1 = (l1 / h).ceil() as i64;
        let mut p0 = Vec::with_capacity((2 * n1 + 1) as usize);
        for j in -n1..=n1 {
            p0.push(m.density(j as f64 * h));
        }
        // FFT grid must hold the widest sum support without wraparound.
        let span = 12.0 * sd * (max_block as f64).sqrt() + 2.0 * l1 + 4.0;
        let mut fft_size = 1usize;
        while (fft_size as f64) * h < 2.0 * span {
            fft_size <<= 1;
        }
        // zero-centered layout: index j <-> x = j*h for j < size/2, else (j-size)*h
        let mut buf = vec![Complex64::new(0.0, 0.0); fft_size];
        for (k, &v) in p0.iter().enumerate() {
            let j = k as i64 - n1;
            let idx = j.rem_euclid(fft_size as i64) as usize;
            buf[idx] = Complex64::new(v * h, 0.0);
        }
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(fft_size);
        fft.process(&mut buf);
        Ok(Self {
            t,
            h,
            p0,
            l1,
            powers: std::collections::HashMap::new(),
            fft_size,
            spectrum: buf,
            pot: pot.clone(),
        })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    fn power(&mut self, k: usize) -> &Vec<f64> {
        let (fft_size, h) = (self.fft_size, self.h);
        if !self.powers.contains_key(&k) {
            let mut buf: Vec<Complex64> = self
                .spectrum
                .iter()
                .map(|&c| {
                    let (r, th) = c.to_polar();
                    Complex64::from_polar(r.powi(k as i32), th * k as f64)
                })
                .collect();
            let mut planner = FftPlanner::new();
            let ifft = planner.plan_fft_inverse(fft_size);
            ifft.process(&mut buf);
            let scale = 1.0 / (fft_size as f64 * h);
            let g: Vec<f64> = buf.iter().map(|c| (c.re * scale).max(0.0)).collect();
            self.powers.insert(k, g);
        }
        self.powers.get(&k).unwrap()
    }

    /// Evaluate `g_k` at real `x` by cubic interpolation on the FFT grid.
    fn g_at(g: &[f64], fft_size: usize, h: f64, x: f64) -> f64 {
        let s = x / h;
        let j0 = s.floor() as i64;
        let u = s - j0 as f64;
        let idx = |j: i64| g[j.rem_euclid(fft_size as i64) as usize];
        let (ym1, y0, y1, y2) = (idx(j0 - 1), idx(j0), idx(j0 + 1), idx(j0 + 2));
        // Catmull-Rom
        let a = 0.5 * (-ym1 + 3.0 * y0 - 3.0 * y1 + y2);
        let b = ym1 - 2.5 * y0 + 2.0 * y1 - 0.5 * y2;
        let c = 0.5 * (y1 - ym1);
        (((a * u + b) * u + c) * u + y0).max(0.0)
    }

    /// `E[f(U_1)]` under the canonical ensemble on a block of length `l`
    /// with block density `sigma`.
    pub fn expect<F: Fn(f64) -> f64>(&mut self, l: usize, sigma: f64, f: F) -> Result<f64> {
        assert!(l >= 1);
        if l == 1 {
            return Ok(f(sigma));
        }
        let total = sigma * l as f64;
        let (h, l1, fft_size) = (self.h, self.l1, self.fft_size);
        let n1 = (l1 / h).ceil() as i64;
        let g = self.power(l - 1).clone();
        let mut num = 0.0;
        let mut den = 0.0;
        for (k, &p) in self.p0.iter().enumerate() {
            let u = (k as i64 - n1) as f64 * h;
            let w = p * Self::g_at(&g, fft_size, h, total - u);
            den += w;
            num += w * f(u);
        }
        if den <= 0.0 {
            return Err(Error::QuadratureNonConvergence {
                residual: f64::INFINITY,
                tol: 0.0,
            });
        }
        Ok(num / den)
    }

    pub fn potential(&self) -> &Potential {
        &self.pot
    }
}

/// How the local canonical expectation is evaluated.
pub enum LocalExpectMethod<'r, R: Rng> {
    /// Brute-force quadrature for blocks up to 4 sites, Monte Carlo beyond.
    Auto {
        rng: &'r mut R,
        samples: usize,
        burn_in: usize,
        thin: usize,
    },
    /// Exact single-site marginal via convolution powers.
    Exact(&'r mut CanonicalMarginal),
}

/// Block density of `field` on the length-`l` block at `y` with the given
/// orientation: sites `y+1..=y+l` for `+`, `y-l+1..=y` for `-`.
pub fn block_density(field: &[f64], y: i64, l: usize, plus: bool) -> f64 {
    let n = field.len();
    let mut s = 0.0;
    for j in 0..l as i64 {
        let x = if plus { y + 1 + j } else { y - j };
        s += field[crate::wrap(x, n)];
    }
    s / l as f64
}

/// Local equilibrium expectation: read the block density off `field`, then
/// evaluate the canonical expectation of a single-site statistic on a block
/// of that density.
pub fn local_canonical_expect<F, R: Rng>(
    field: &[f64],
    pot: &Potential,
    s: f64,
    y: i64,
    l: usize,
    plus: bool,
    f: F,
    method: LocalExpectMethod<'_, R>,
) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    assert!(l >= 1);
    let sigma = block_density(field, y, l, plus);
    canonical_single_site(pot, s, l, sigma, f, method)
}

/// Canonical expectation of a single-site statistic at explicit block
/// density (the evaluation core of `local_canonical_expect`).
pub fn canonical_single_site<F, R: Rng>(
    pot: &Potential,
    t: f64,
    l: usize,
    sigma: f64,
    f: F,
    method: LocalExpectMethod<'_, R>,
) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    match method {
        LocalExpectMethod::Exact(marginal) => marginal.expect(l, sigma, f),
        LocalExpectMethod::Auto {
            rng,
            samples,
            burn_in,
            thin,
        } => {
            if l == 1 {
                return Ok(f(sigma));
            }
            if l <= 4 {
                return canonical_expect_bruteforce(pot, sigma, t, l, |u| f(u[0]));
            }
            let mut sampler = super::sampling::CanonicalSampler::new(pot, sigma, t, l);
            sampler.sweeps(burn_in, rng);
            let mut acc = 0.0;
            let mut count = 0usize;
            for _ in 0..samples {
                sampler.sweeps(thin, rng);
                for &u in &sampler.u {
                    acc += f(u);
                    count += 1;
                }
            }
            Ok(acc / count as f64)
        }
    }
}

/// Deviation of the canonical single-site expectation from its
/// grand-canonical counterpart, per block length; used for the
/// equivalence-of-ensembles decay fit.
pub fn ensemble_gap_curve(
    pot: &Potential,
    t: f64,
    lengths: &[usize],
) -> Result<Vec<(usize, f64)>> {
    let max_l = *lengths.iter().max().unwrap();
    let mut marginal = CanonicalMarginal::new(pot, t, max_l)?;
    let gc = super::gc_expect(pot, 0.0, t, |u| pot.du(t, u))?;
    let mut out = Vec::new();
    for &l in lengths {
        let can = marginal.expect(l, 0.0, |u| pot.du(t, u))?;
        out.push((l, (can - gc).abs()));
    }
    Ok(out)
}
