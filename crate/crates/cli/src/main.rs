//! Experiment harness for the lattice-interface laboratory.
//!
//! `glkpz <subcommand> --config <path> [--seed S] [--out DIR]`
//!
//! Subcommands mirror the experiment kinds; the config file is a flat,
//! strictly parsed `key = value` list (see the `help-config` subcommand for
//! every key and its default). Each run writes its artifacts plus a
//! manifest with checksums, and exits nonzero when an asserted invariant
//! fails.

mod config;
mod experiments;
mod manifest;

use clap::{Parser, Subcommand};
use config::{Experiment, RunConfig};
use manifest::ArtifactWriter;
use std::path::PathBuf;
use std::time::Instant;

#[derive(Parser)]
#[command(name = "glkpz", version, about = "Lattice interface dynamics laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Path to the flat key = value config file (optional: defaults apply)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override seed.base
    #[arg(long)]
    seed: Option<u64>,
    /// Override output.dir
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run charge-field trajectories and write snapshots
    Simulate(CommonArgs),
    /// Tilted-ensemble identities and the homogenized coefficient table
    EnsembleTests(CommonArgs),
    /// Kernel mass/positivity/semigroup/regularity and the continuum gap
    HeatKernelTests(CommonArgs),
    /// Centering taxonomy, block-decay laws, equivalence of ensembles
    BgDiagnostics(CommonArgs),
    /// Shared-tape coupling of the transform and the reference equation
    KpzConvergence(CommonArgs),
    /// Full vs localized dynamics on shared noise
    Localization(CommonArgs),
    /// Print every config key with its default value
    HelpConfig,
}

fn main() {
    let cli = Cli::parse();
    let (experiment, args) = match cli.command {
        Command::Simulate(a) => (Experiment::Simulate, a),
        Command::EnsembleTests(a) => (Experiment::EnsembleTests, a),
        Command::HeatKernelTests(a) => (Experiment::HeatKernelTests, a),
        Command::BgDiagnostics(a) => (Experiment::BgDiagnostics, a),
        Command::KpzConvergence(a) => (Experiment::KpzConvergence, a),
        Command::Localization(a) => (Experiment::Localization, a),
        Command::HelpConfig => {
            print!("{}", RunConfig::defaults(Experiment::Simulate).emit());
            return;
        }
    };
    std::process::exit(run(experiment, args));
}

fn run(experiment: Experiment, args: CommonArgs) -> i32 {
    let mut cfg = match &args.config {
        Some(path) => match config::parse_config(path, experiment) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("{e}");
                return 2;
            }
        },
        None => RunConfig::defaults(experiment),
    };
    if cfg.experiment != experiment {
        eprintln!(
            "config sets experiment = {}, but the subcommand is {}",
            cfg.experiment.name(),
            experiment.name()
        );
        return 2;
    }
    if let Some(seed) = args.seed {
        cfg.seed_base = seed;
    }
    if let Some(out) = &args.out {
        cfg.output_dir = out.display().to_string();
    }
    let start = Instant::now();
    let out_dir = PathBuf::from(&cfg.output_dir);
    let mut writer = match ArtifactWriter::new(&out_dir) {
        Ok(w) => w,
        Err(e) => {
            eprintln!("cannot create output directory {}: {e}", out_dir.display());
            return 2;
        }
    };
    let result = match experiment {
        Experiment::Simulate => experiments::run_simulate(&cfg, &mut writer),
        Experiment::EnsembleTests => experiments::run_ensemble_tests(&cfg, &mut writer),
        Experiment::HeatKernelTests => experiments::run_heat_kernel_tests(&cfg, &mut writer),
        Experiment::BgDiagnostics => experiments::run_bg_diagnostics(&cfg, &mut writer),
        Experiment::KpzConvergence => experiments::run_kpz_convergence(&cfg, &mut writer),
        Experiment::Localization => experiments::run_localization(&cfg, &mut writer),
    };
    let failures = match result {
        Ok(f) => f,
        Err(e) => {
            eprintln!("{}: {e}", experiment.name());
            vec![format!("{e}")]
        }
    };
    let seeds: Vec<u64> = (0..cfg.seed_count as u64)
        .map(|k| cfg.seed_base + k)
        .collect();
    let manifest = match writer.finish(
        experiment.name(),
        cfg.emit(),
        seeds,
        start.elapsed().as_secs_f64(),
        failures,
    ) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("cannot write manifest: {e}");
            return 2;
        }
    };
    if manifest.pass {
        println!(
            "{}: pass ({} artifacts, {:.2}s)",
            experiment.name(),
            manifest.artifacts.len(),
            manifest.wall_seconds
        );
        0
    } else {
        for f in &manifest.failures {
            eprintln!("{}: FAIL: {f}", experiment.name());
        }
        1
    }
}
