//! Experiment drivers: each runs its part of the suite, writes plot-ready
//! artifacts, and returns the list of failed invariants (empty = pass).

use crate::config::{OutputFormat, PotentialKind, RunConfig};
use crate::manifest::ArtifactWriter;
use glkpz_core::bg::{self, StatKind};
use glkpz_core::cole_hopf::{ap_monitor, height_of_snapshot, hoelder_monitor, smoothed_gartner, Characteristic};
use glkpz_core::ensemble::{self, CoefficientCache, GcMeasure};
use glkpz_core::heat_kernel::{gap_curve, verify_regularity, verify_semigroup, KernelEngine};
use glkpz_core::lattice::{
    self, initial_field, localization_experiment, InitialData, LocalizationConfig, SimConfig,
};
use glkpz_core::noise::tape_for;
use glkpz_core::potential::{validate_assumptions, Potential};
use glkpz_core::report::Report;
use glkpz_core::tishe::{coupling_experiment, CouplingConfig, WScheme};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::Serialize;
use std::fmt::Write as _;

pub type RunResult = Result<Vec<String>, Box<dyn std::error::Error>>;

pub fn build_potential(cfg: &RunConfig) -> Result<Potential, Box<dyn std::error::Error>> {
    Ok(match cfg.potential_kind {
        PotentialKind::Gaussian => Potential::gaussian(),
        PotentialKind::Perturbed => Potential::perturbed(cfg.potential_eps, cfg.potential_omega)?,
    })
}

fn seeds_of(cfg: &RunConfig) -> Vec<u64> {
    (0..cfg.seed_count as u64).map(|k| cfg.seed_base + k).collect()
}

fn emit_report<T: Serialize>(
    writer: &mut ArtifactWriter,
    name: &str,
    kind: &'static str,
    payload: &T,
) -> std::io::Result<()> {
    let report = Report::new(kind, payload);
    let text = serde_json::to_string_pretty(&report).expect("report serialization");
    writer.write(&format!("{name}.json"), &text)?;
    Ok(())
}

pub fn run_simulate(cfg: &RunConfig, writer: &mut ArtifactWriter) -> RunResult {
    let pot = build_potential(cfg)?;
    let mut failures = Vec::new();
    let cache = CoefficientCache::build(&pot, cfg.sde_t_final.max(0.1) + 0.2, 1.0 / 128.0)?;
    let charac = Characteristic::build(&cache, cfg.sde_n, cfg.sde_t_final.max(0.1) + 0.1)?;
    let mut monitor_csv = String::from("seed,t,monitor,value\n");
    for seed in seeds_of(cfg) {
        let sim = SimConfig {
            n: cfg.sde_n,
            t_final: cfg.sde_t_final,
            c_stab: cfg.sde_dt_factor,
            record_every: cfg.sde_record_every,
            initial: if cfg.sde_initial_canonical {
                InitialData::Canonical
            } else {
                InitialData::Flat
            },
            canonical_sweeps: 50,
        };
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let init = initial_field(&pot, &sim, &mut rng);
        let sum0 = lattice::kahan_sum(&init);
        let mut tape = tape_for(seed, 0, cfg.sde_n);
        let traj = lattice::simulate(&pot, &sim, init, &mut tape)?;
        let last = traj.snapshots.last().unwrap();
        let drift = (lattice::kahan_sum(&last.u) - sum0).abs();
        if drift > 1e-8 {
            failures.push(format!("seed {seed}: charge drift {drift:.3e} above 1e-8"));
        }
        let mut height_csv = String::from("t,x,h,Z\n");
        let engine = glkpz_core::heat_kernel::KernelEngine::new(cfg.sde_n, &cache, &charac);
        let span = cfg.smoothing_span / (cfg.sde_n * cfg.sde_n) as f64;
        for snap in &traj.snapshots {
            let hf = height_of_snapshot(&traj, snap, &charac, &cache);
            let (semi, _) = hoelder_monitor(&hf.h, cfg.gamma_reg);
            writeln!(monitor_csv, "{seed},{},hoelder_seminorm,{semi}", snap.t).unwrap();
            let z = glkpz_core::cole_hopf::gartner(&hf, &cache)?;
            let s_field = if span > 0.0 {
                smoothed_gartner(&z, &engine, snap.t, span)?
            } else {
                z.clone()
            };
            let ap = ap_monitor(&z, &s_field, cfg.gamma_ap);
            writeln!(
                monitor_csv,
                "{seed},{},sup_trigger,{}",
                snap.t, ap.trigger_value
            )
            .unwrap();
            for x in 0..traj.n {
                writeln!(height_csv, "{},{},{},{}", snap.t, x, hf.h[x], z[x]).unwrap();
            }
        }
        writer.write(&format!("height_seed{seed}.csv"), &height_csv)?;
        match cfg.output_format {
            OutputFormat::Csv => {
                let mut csv = String::from("t,x,U,J\n");
                for snap in &traj.snapshots {
                    let j = traj.current_of(snap);
                    for x in 0..traj.n {
                        writeln!(csv, "{},{},{},{}", snap.t, x, snap.u[x], j[x]).unwrap();
                    }
                }
                writer.write(&format!("trajectory_seed{seed}.csv"), &csv)?;
            }
            OutputFormat::Json => {
                #[derive(Serialize)]
                struct Snap<'a> {
                    t: f64,
                    u: &'a [f64],
                    j0: f64,
                }
                let snaps: Vec<Snap> = traj
                    .snapshots
                    .iter()
                    .map(|s| Snap {
                        t: s.t,
                        u: &s.u,
                        j0: s.j0,
                    })
                    .collect();
                emit_report(writer, &format!("trajectory_seed{seed}"), "trajectory", &snaps)?;
            }
        }
    }
    writer.write("monitors.csv", &monitor_csv)?;
    Ok(failures)
}

#[derive(Serialize)]
struct EnsembleReport {
    validation_pass: bool,
    worst_normalization: f64,
    worst_mean: f64,
    worst_response_variance: f64,
    worst_parts_residual: f64,
    coefficients: Vec<ensemble::CoefficientRow>,
}

pub fn run_ensemble_tests(cfg: &RunConfig, writer: &mut ArtifactWriter) -> RunResult {
    let pot = build_potential(cfg)?;
    let t_grid: Vec<f64> = (0..=4).map(|i| i as f64 * 0.25).collect();
    let a_grid: Vec<f64> = (-120..=120).map(|i| i as f64 * 0.05).collect();
    let validation = validate_assumptions(&pot, &t_grid, &a_grid);
    let mut worst_norm: f64 = 0.0;
    let mut worst_mean: f64 = 0.0;
    let mut worst_resp: f64 = 0.0;
    let mut worst_parts: f64 = 0.0;
    for &t in &t_grid {
        for &sigma in &[-1.0, -0.5, 0.0, 0.5, 1.0] {
            let m = GcMeasure::with_mean(&pot, sigma, t, 1e-11)?;
            worst_norm = worst_norm.max((m.expect(|_| 1.0)? - 1.0).abs());
            worst_mean = worst_mean.max((m.mean()? - sigma).abs());
            worst_parts = worst_parts
                .max(ensemble::ibp_check(&pot, sigma, t, |u| u, |_| 1.0)?)
                .max(ensemble::ibp_check(&pot, sigma, t, |u| u * u * u, |u| 3.0 * u * u)?);
        }
        let c = ensemble::homogenized(&pot, t)?;
        let second = ensemble::gc_expect(&pot, 0.0, t, |u| u * u)?;
        worst_resp = worst_resp.max((c.alpha_bar * second - 1.0).abs());
    }
    let cache = CoefficientCache::build(&pot, 1.0, 1.0 / 64.0)?;
    let rows = cache.table(1.0 / 16.0);
    // coefficient table export
    let mut csv = String::from("t,alpha_bar,alpha_bar_wedge,lambda,renorm\n");
    for r in &rows {
        writeln!(
            csv,
            "{},{},{},{},{}",
            r.t, r.alpha_bar, r.alpha_bar_wedge, r.lambda, r.renorm
        )
        .unwrap();
    }
    writer.write("coefficients.csv", &csv)?;
    let payload = EnsembleReport {
        validation_pass: validation.pass(),
        worst_normalization: worst_norm,
        worst_mean,
        worst_response_variance: worst_resp,
        worst_parts_residual: worst_parts,
        coefficients: rows,
    };
    emit_report(writer, "ensemble_report", "ensemble-tests", &payload)?;
    let mut failures = Vec::new();
    if !validation.pass() {
        failures.push("potential failed its declared-bounds validation".into());
    }
    if worst_norm > 1e-8 {
        failures.push(format!("normalization residual {worst_norm:.3e} above 1e-8"));
    }
    if worst_mean > 1e-8 {
        failures.push(format!("mean residual {worst_mean:.3e} above 1e-8"));
    }
    if worst_resp > 1e-6 {
        failures.push(format!(
            "response-variance identity residual {worst_resp:.3e} above 1e-6"
        ));
    }
    if worst_parts > 1e-7 {
        failures.push(format!(
            "integration-by-parts residual {worst_parts:.3e} above 1e-7"
        ));
    }
    Ok(failures)
}

#[derive(Serialize)]
struct KernelSuiteReport {
    per_n: Vec<KernelSuiteRow>,
    gap: glkpz_core::heat_kernel::GapReport,
}

#[derive(Serialize)]
struct KernelSuiteRow {
    n: usize,
    worst_mass_residual: f64,
    worst_semigroup_residual: f64,
    halving_factor: f64,
    moment_ratio: f64,
}

pub fn run_heat_kernel_tests(cfg: &RunConfig, writer: &mut ArtifactWriter) -> RunResult {
    let pot = build_potential(cfg)?;
    let cache = CoefficientCache::build(&pot, 1.5, 1.0 / 128.0)?;
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed_base);
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for &n in &cfg.hk_n_list {
        let charac = Characteristic::build(&cache, n, 1.4)?;
        let engine = KernelEngine::new(n, &cache, &charac);
        let nn = (n * n) as f64;
        let mut worst_mass: f64 = 0.0;
        let mut worst_semi: f64 = 0.0;
        use rand::Rng;
        for _ in 0..20 {
            let s = rng.gen_range(0.0..1.0);
            let d1 = rng.gen_range(0.05..2.0) / nn;
            let d2 = rng.gen_range(0.05..2.0) / nn;
            let slice = engine.build(s, s + d1)?;
            worst_mass = worst_mass.max((slice.mass() - 1.0).abs());
            worst_semi = worst_semi.max(verify_semigroup(&engine, s, s + d1, s + d1 + d2)?);
        }
        let reg = verify_regularity(&engine, 0.2, 0.2 + 1.0 / nn, &[1, 2])?;
        if worst_mass > 1e-12 {
            failures.push(format!("N={n}: kernel mass residual {worst_mass:.3e}"));
        }
        if worst_semi > 1e-9 {
            failures.push(format!("N={n}: semigroup residual {worst_semi:.3e}"));
        }
        let target = std::f64::consts::SQRT_2;
        if (reg.halving_factor - target).abs() > 0.15 * target {
            failures.push(format!(
                "N={n}: gradient halving factor {} outside sqrt2 +/- 15%",
                reg.halving_factor
            ));
        }
        rows.push(KernelSuiteRow {
            n,
            worst_mass_residual: worst_mass,
            worst_semigroup_residual: worst_semi,
            halving_factor: reg.halving_factor,
            moment_ratio: reg.moment_ratio,
        });
        // representative slice export: header comment then (z, k(z)) rows
        let slice = engine.build(0.2, 0.2 + 1.0 / nn)?;
        let mut csv = format!(
            "# N={} s={} t={} offset={}\nz,k\n",
            n, slice.s, slice.t, slice.offset
        );
        for (z, v) in slice.k.iter().enumerate() {
            writeln!(csv, "{z},{v}").unwrap();
        }
        writer.write(&format!("kernel_slice_N{n}.csv"), &csv)?;
    }
    let gap = gap_curve(&cache, &cfg.hk_n_list, 0.0, 0.5)?;
    for pair in gap.points.windows(2) {
        if pair[1].l2_gap >= pair[0].l2_gap {
            failures.push(format!(
                "continuum gap not decreasing between N={} and N={}",
                pair[0].n, pair[1].n
            ));
        }
    }
    emit_report(
        writer,
        "heat_kernel_report",
        "heat-kernel-tests",
        &KernelSuiteReport { per_n: rows, gap },
    )?;
    Ok(failures)
}

#[derive(Serialize)]
struct DecayEntry {
    report: bg::BlockDecayReport,
    band: (f64, f64),
    verdict: bool,
}

#[derive(Serialize)]
struct BgReport {
    taxonomy: bg::TaxonomyReport,
    decays: Vec<DecayEntry>,
    ensemble_gap: bg::EnsembleGapReport,
}

pub fn run_bg_diagnostics(cfg: &RunConfig, writer: &mut ArtifactWriter) -> RunResult {
    let pot = build_potential(cfg)?;
    let mut failures = Vec::new();
    let t_grid: Vec<f64> = (0..=4).map(|i| i as f64 * 0.25).collect();
    let taxonomy = bg::verify_taxonomy(&pot, &t_grid, 1e-5)?;
    if !taxonomy.pass {
        failures.push("centering taxonomy failed".into());
    }
    let params = bg::BlockDecayParams {
        draws: cfg.bg_draws,
        window: cfg.bg_window,
        sweeps: 50,
    };
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed_base);
    let mut decays = Vec::new();
    for (kind, lo, hi) in [
        (StatKind::DriftResponse, -0.8, -0.2),
        (StatKind::LinearCorrectedFlux, -1.4, -0.6),
        (StatKind::CorrectedFlux, f64::NEG_INFINITY, -1.0),
        (StatKind::QuadraticFluct, f64::NEG_INFINITY, -0.3),
    ] {
        let rep = bg::block_decay(&pot, kind, cfg.bg_t, &cfg.bg_l_list, &params, &mut rng)?;
        let verdict = rep.fitted_slope >= lo && rep.fitted_slope <= hi;
        if !verdict {
            failures.push(format!(
                "{}: slope {:.3} outside [{lo}, {hi}]",
                kind.name(),
                rep.fitted_slope
            ));
        }
        decays.push(DecayEntry {
            report: rep,
            band: (lo, hi),
            verdict,
        });
    }
    let ensemble_gap = bg::ensemble_gap_report(&pot, cfg.bg_t, &[8, 16, 32, 64])?;
    if (ensemble_gap.fitted_slope + 1.0).abs() > 0.3 {
        failures.push(format!(
            "ensemble-gap slope {:.3} outside -1 +/- 0.3",
            ensemble_gap.fitted_slope
        ));
    }
    emit_report(
        writer,
        "bg_report",
        "bg-diagnostics",
        &BgReport {
            taxonomy,
            decays,
            ensemble_gap,
        },
    )?;
    Ok(failures)
}

pub fn run_kpz_convergence(cfg: &RunConfig, writer: &mut ArtifactWriter) -> RunResult {
    let pot = build_potential(cfg)?;
    let t_max = cfg.sde_t_final + 1.0;
    let cache = CoefficientCache::build(&pot, t_max, 1.0 / 256.0)?;
    let config = CouplingConfig {
        n_list: cfg.kpz_n_list.clone(),
        seeds: seeds_of(cfg),
        t_final: cfg.sde_t_final,
        c_stab: cfg.sde_dt_factor,
        span_factor: cfg.smoothing_span,
        scheme: if cfg.smoothing_span > 0.0 {
            WScheme::Explicit
        } else {
            WScheme::ExponentialNoise
        },
        dt3_factor: cfg.kpz_dt3_factor,
        record_every: cfg.sde_record_every,
        canonical_sweeps: 50,
    };
    let report = coupling_experiment(&pot, &cache, &config)?;
    let mut csv = String::from("N,seed,t,sup_gap\n");
    for p in &report.points {
        for o in &p.outcomes {
            for &(t, gap) in &o.gap_curve {
                writeln!(csv, "{},{},{},{}", p.n, o.seed, t, gap).unwrap();
            }
        }
    }
    writer.write("coupling_gaps.csv", &csv)?;
    emit_report(writer, "coupling_report", "kpz-convergence", &report)?;
    let mut failures = Vec::new();
    if !report.monotone_decreasing {
        let medians: Vec<f64> = report.points.iter().map(|p| p.median_sup_gap).collect();
        failures.push(format!("median sup gaps not decreasing: {medians:?}"));
    }
    for p in &report.points {
        if (p.breach_count as f64) >= 0.05 * p.seed_count as f64 {
            failures.push(format!(
                "N={}: positivity breaches {}/{} at or above 5%",
                p.n, p.breach_count, p.seed_count
            ));
        }
    }
    Ok(failures)
}

#[derive(Serialize)]
struct LocalizationReport {
    margin: usize,
    outcomes: Vec<lattice::LocalizationOutcome>,
    max_sup_diff: f64,
    max_control: f64,
}

pub fn run_localization(cfg: &RunConfig, writer: &mut ArtifactWriter) -> RunResult {
    let pot = build_potential(cfg)?;
    let n = cfg.sde_n;
    let horizon = cfg.loc_horizon_factor / (n * n) as f64;
    let config = LocalizationConfig {
        n,
        inner_len: cfg.loc_inner_len,
        horizon,
        gamma: cfg.loc_gamma,
        c_stab: cfg.sde_dt_factor,
        seeds: seeds_of(cfg),
        canonical_sweeps: 50,
    };
    let outcomes = localization_experiment(&pot, &config)?;
    let max = outcomes.iter().map(|o| o.sup_diff).fold(0.0f64, f64::max);
    let max_control = outcomes
        .iter()
        .map(|o| o.sup_diff_no_buffer)
        .fold(0.0f64, f64::max);
    let mut csv = String::from("seed,sup_diff,sup_diff_no_buffer\n");
    for o in &outcomes {
        writeln!(csv, "{},{},{}", o.seed, o.sup_diff, o.sup_diff_no_buffer).unwrap();
    }
    writer.write("localization.csv", &csv)?;
    emit_report(
        writer,
        "localization_report",
        "localization",
        &LocalizationReport {
            margin: lattice::localization_margin(n, horizon, cfg.loc_inner_len, cfg.loc_gamma),
            outcomes,
            max_sup_diff: max,
            max_control,
        },
    )?;
    let mut failures = Vec::new();
    if max >= 1e-6 {
        failures.push(format!("localization sup difference {max:.3e} at or above 1e-6"));
    }
    Ok(failures)
}
