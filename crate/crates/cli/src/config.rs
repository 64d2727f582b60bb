//! Flat strict key-value run configuration.
//!
//! Format: UTF-8 lines of `key = value`, `#` comments, blank lines ignored.
//! Unknown keys, malformed lines, and out-of-range values are errors that
//! name the offending key and line.

use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Simulate,
    EnsembleTests,
    HeatKernelTests,
    BgDiagnostics,
    KpzConvergence,
    Localization,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Simulate => "simulate",
            Experiment::EnsembleTests => "ensemble-tests",
            Experiment::HeatKernelTests => "heat-kernel-tests",
            Experiment::BgDiagnostics => "bg-diagnostics",
            Experiment::KpzConvergence => "kpz-convergence",
            Experiment::Localization => "localization",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "simulate" => Experiment::Simulate,
            "ensemble-tests" => Experiment::EnsembleTests,
            "heat-kernel-tests" => Experiment::HeatKernelTests,
            "bg-diagnostics" => Experiment::BgDiagnostics,
            "kpz-convergence" => Experiment::KpzConvergence,
            "localization" => Experiment::Localization,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PotentialKind {
    Gaussian,
    Perturbed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub potential_kind: PotentialKind,
    pub potential_eps: f64,
    pub potential_omega: f64,
    pub sde_n: usize,
    pub sde_dt_factor: f64,
    pub sde_t_final: f64,
    pub sde_record_every: usize,
    pub sde_initial_canonical: bool,
    pub seed_base: u64,
    pub seed_count: usize,
    pub gamma_reg: f64,
    pub gamma_ap: f64,
    pub smoothing_span: f64,
    pub output_dir: String,
    pub output_format: OutputFormat,
    pub kpz_n_list: Vec<usize>,
    pub kpz_dt3_factor: f64,
    pub hk_n_list: Vec<usize>,
    pub loc_inner_len: usize,
    pub loc_gamma: f64,
    pub loc_horizon_factor: f64,
    pub bg_t: f64,
    pub bg_draws: usize,
    pub bg_window: usize,
    pub bg_l_list: Vec<usize>,
}

impl RunConfig {
    pub fn defaults(experiment: Experiment) -> Self {
        Self {
            experiment,
            potential_kind: PotentialKind::Perturbed,
            potential_eps: 0.3,
            potential_omega: 1.0,
            sde_n: 64,
            sde_dt_factor: 0.5,
            sde_t_final: 0.25,
            sde_record_every: 64,
            sde_initial_canonical: true,
            seed_base: 0,
            seed_count: 1,
            gamma_reg: 0.1,
            gamma_ap: 0.05,
            smoothing_span: 0.1,
            output_dir: "out".to_string(),
            output_format: OutputFormat::Csv,
            kpz_n_list: vec![16, 32, 64],
            kpz_dt3_factor: 1.0,
            hk_n_list: vec![16, 32, 64],
            loc_inner_len: 8,
            loc_gamma: 0.15,
            loc_horizon_factor: 1.0,
            bg_t: 0.4,
            bg_draws: 96,
            bg_window: 160,
            bg_l_list: vec![4, 8, 16, 32, 64],
        }
    }

    /// Canonical emission: sorted `key = value` lines. Re-parsing the output
    /// reproduces the configuration exactly.
    pub fn emit(&self) -> String {
        let mut s = String::new();
        let list = |v: &[usize]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        let mut pairs: Vec<(String, String)> = vec![
            ("experiment".into(), self.experiment.name().into()),
            (
                "potential.kind".into(),
                match self.potential_kind {
                    PotentialKind::Gaussian => "gaussian".into(),
                    PotentialKind::Perturbed => "perturbed".into(),
                },
            ),
            ("potential.eps".into(), self.potential_eps.to_string()),
            ("potential.omega".into(), self.potential_omega.to_string()),
            ("sde.N".into(), self.sde_n.to_string()),
            ("sde.dt_factor".into(), self.sde_dt_factor.to_string()),
            ("sde.T_final".into(), self.sde_t_final.to_string()),
            ("sde.record_every".into(), self.sde_record_every.to_string()),
            (
                "sde.initial".into(),
                if self.sde_initial_canonical {
                    "canonical".into()
                } else {
                    "flat".into()
                },
            ),
            ("seed.base".into(), self.seed_base.to_string()),
            ("seed.count".into(), self.seed_count.to_string()),
            ("proof.gamma_reg".into(), self.gamma_reg.to_string()),
            ("proof.gamma_ap".into(), self.gamma_ap.to_string()),
            ("proof.smoothing_span".into(), self.smoothing_span.to_string()),
            ("output.dir".into(), self.output_dir.clone()),
            (
                "output.format".into(),
                match self.output_format {
                    OutputFormat::Csv => "csv".into(),
                    OutputFormat::Json => "json".into(),
                },
            ),
            ("kpz.n_list".into(), list(&self.kpz_n_list)),
            ("kpz.dt3_factor".into(), self.kpz_dt3_factor.to_string()),
            ("hk.n_list".into(), list(&self.hk_n_list)),
            ("localization.inner_len".into(), self.loc_inner_len.to_string()),
            ("localization.gamma".into(), self.loc_gamma.to_string()),
            (
                "localization.horizon_factor".into(),
                self.loc_horizon_factor.to_string(),
            ),
            ("bg.t".into(), self.bg_t.to_string()),
            ("bg.draws".into(), self.bg_draws.to_string()),
            ("bg.window".into(), self.bg_window.to_string()),
            ("bg.l_list".into(), list(&self.bg_l_list)),
        ];
        pairs.sort();
        for (k, v) in pairs {
            writeln!(s, "{k} = {v}").unwrap();
        }
        s
    }
}

#[derive(Debug)]
pub struct ParseError {
    pub line: usize,
    pub key: String,
    pub message: String,
}

impl std::fmt::Display for ParseError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "config error at line {} (key `{}`): {}",
            self.line, self.key, self.message
        )
    }
}

impl std::error::Error for ParseError {}

fn err(line: usize, key: &str, message: impl Into<String>) -> ParseError {
    ParseError {
        line,
        key: key.to_string(),
        message: message.into(),
    }
}

/// Strict parse; `default_experiment` applies when the file does not carry
/// an `experiment` key (the CLI subcommand).
pub fn parse_config_str(
    text: &str,
    default_experiment: Experiment,
) -> Result<RunConfig, ParseError> {
    let mut cfg = RunConfig::defaults(default_experiment);
    let mut seen: Vec<String> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(err(line_no, line, "expected `key = value`"));
        };
        let key = key.trim();
        let value = value.trim();
        if seen.iter().any(|k| k == key) {
            return Err(err(line_no, key, "duplicate key"));
        }
        seen.push(key.to_string());
        let parse_f64 = |v: &str| -> Result<f64, ParseError> {
            v.parse::<f64>()
                .map_err(|_| err(line_no, key, format!("`{v}` is not a number")))
        };
        let parse_usize = |v: &str| -> Result<usize, ParseError> {
            v.parse::<usize>()
                .map_err(|_| err(line_no, key, format!("`{v}` is not a nonnegative integer")))
        };
        let parse_list = |v: &str| -> Result<Vec<usize>, ParseError> {
            v.split(',')
                .map(|p| {
                    p.trim()
                        .parse::<usize>()
                        .map_err(|_| err(line_no, key, format!("`{p}` is not an integer")))
                })
                .collect()
        };
        match key {
            "experiment" => {
                cfg.experiment = Experiment::parse(value)
                    .ok_or_else(|| err(line_no, key, format!("unknown experiment `{value}`")))?;
            }
            "potential.kind" => {
                cfg.potential_kind = match value {
                    "gaussian" => PotentialKind::Gaussian,
                    "perturbed" => PotentialKind::Perturbed,
                    _ => return Err(err(line_no, key, format!("unknown kind `{value}`"))),
                };
            }
            "potential.eps" => {
                let v = parse_f64(value)?;
                if v.abs() >= 0.5 {
                    return Err(err(line_no, key, "potential.eps must satisfy |eps| < 1/2"));
                }
                cfg.potential_eps = v;
            }
            "potential.omega" => cfg.potential_omega = parse_f64(value)?,
            "sde.N" => {
                let v = parse_usize(value)?;
                if v < 4 {
                    return Err(err(line_no, key, "sde.N must be >= 4"));
                }
                cfg.sde_n = v;
            }
            "sde.dt_factor" => {
                let v = parse_f64(value)?;
                if !(v > 0.0 && v <= 1.0) {
                    return Err(err(line_no, key, "sde.dt_factor must lie in (0, 1]"));
                }
                cfg.sde_dt_factor = v;
            }
            "sde.T_final" => {
                let v = parse_f64(value)?;
                if v < 0.0 {
                    return Err(err(line_no, key, "sde.T_final must be >= 0"));
                }
                cfg.sde_t_final = v;
            }
            "sde.record_every" => {
                let v = parse_usize(value)?;
                if v == 0 {
                    return Err(err(line_no, key, "sde.record_every must be >= 1"));
                }
                cfg.sde_record_every = v;
            }
            "sde.initial" => {
                cfg.sde_initial_canonical = match value {
                    "canonical" => true,
                    "flat" => false,
                    _ => return Err(err(line_no, key, format!("unknown initial `{value}`"))),
                };
            }
            "seed.base" => {
                cfg.seed_base = value
                    .parse::<u64>()
                    .map_err(|_| err(line_no, key, format!("`{value}` is not a seed")))?;
            }
            "seed.count" => {
                let v = parse_usize(value)?;
                if v == 0 {
                    return Err(err(line_no, key, "seed.count must be >= 1"));
                }
                cfg.seed_count = v;
            }
            "proof.gamma_reg" => {
                let v = parse_f64(value)?;
                if !(0.0..=1.0).contains(&v) {
                    return Err(err(line_no, key, "proof.gamma_reg must lie in [0, 1]"));
                }
                cfg.gamma_reg = v;
            }
            "proof.gamma_ap" => {
                let v = parse_f64(value)?;
                if !(0.0..=1.0).contains(&v) {
                    return Err(err(line_no, key, "proof.gamma_ap must lie in [0, 1]"));
                }
                cfg.gamma_ap = v;
            }
            "proof.smoothing_span" => {
                let v = parse_f64(value)?;
                if v < 0.0 {
                    return Err(err(line_no, key, "proof.smoothing_span must be >= 0"));
                }
                cfg.smoothing_span = v;
            }
            "output.dir" => cfg.output_dir = value.to_string(),
            "output.format" => {
                cfg.output_format = match value {
                    "csv" => OutputFormat::Csv,
                    "json" => OutputFormat::Json,
                    _ => return Err(err(line_no, key, format!("unknown format `{value}`"))),
                };
            }
            "kpz.n_list" => {
                let v = parse_list(value)?;
                if v.iter().any(|&n| n < 4) {
                    return Err(err(line_no, key, "kpz.n_list entries must be >= 4"));
                }
                cfg.kpz_n_list = v;
            }
            "kpz.dt3_factor" => {
                let v = parse_f64(value)?;
                if v <= 0.0 {
                    return Err(err(line_no, key, "kpz.dt3_factor must be > 0"));
                }
                cfg.kpz_dt3_factor = v;
            }
            "hk.n_list" => {
                let v = parse_list(value)?;
                if v.iter().any(|&n| n < 4) {
                    return Err(err(line_no, key, "hk.n_list entries must be >= 4"));
                }
                cfg.hk_n_list = v;
            }
            "localization.inner_len" => {
                let v = parse_usize(value)?;
                if v < 2 {
                    return Err(err(line_no, key, "localization.inner_len must be >= 2"));
                }
                cfg.loc_inner_len = v;
            }
            "localization.gamma" => {
                let v = parse_f64(value)?;
                if !(0.0..=1.0).contains(&v) {
                    return Err(err(line_no, key, "localization.gamma must lie in [0, 1]"));
                }
                cfg.loc_gamma = v;
            }
            "localization.horizon_factor" => {
                let v = parse_f64(value)?;
                if v <= 0.0 {
                    return Err(err(line_no, key, "localization.horizon_factor must be > 0"));
                }
                cfg.loc_horizon_factor = v;
            }
            "bg.t" => {
                let v = parse_f64(value)?;
                if v < 0.0 {
                    return Err(err(line_no, key, "bg.t must be >= 0"));
                }
                cfg.bg_t = v;
            }
            "bg.draws" => {
                let v = parse_usize(value)?;
                if v == 0 {
                    return Err(err(line_no, key, "bg.draws must be >= 1"));
                }
                cfg.bg_draws = v;
            }
            "bg.window" => {
                let v = parse_usize(value)?;
                if v < 8 {
                    return Err(err(line_no, key, "bg.window must be >= 8"));
                }
                cfg.bg_window = v;
            }
            "bg.l_list" => {
                let v = parse_list(value)?;
                if v.iter().any(|&l| l == 0) {
                    return Err(err(line_no, key, "bg.l_list entries must be >= 1"));
                }
                cfg.bg_l_list = v;
            }
            _ => return Err(err(line_no, key, "unknown key")),
        }
    }
    if cfg.bg_window < 2 * cfg.bg_l_list.iter().copied().max().unwrap_or(1) {
        return Err(err(
            0,
            "bg.window",
            "bg.window must be at least twice the largest bg.l_list entry",
        ));
    }
    Ok(cfg)
}

pub fn parse_config(
    path: &Path,
    default_experiment: Experiment,
) -> Result<RunConfig, Box<dyn std::error::Error>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    Ok(parse_config_str(&text, default_experiment)?)
}
