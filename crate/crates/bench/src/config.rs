//! Experiment configuration: JSON files, `--set key=value` overrides and
//! per-experiment defaults.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rankadapt::estimators::SolverConfig;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{BenchError, BenchResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExperimentId {
    #[serde(rename = "E1_denoise_bounds")]
    E1,
    #[serde(rename = "E2_alignment")]
    E2,
    #[serde(rename = "E3_adaptivity")]
    E3,
    #[serde(rename = "E4_sysid")]
    E4,
    #[serde(rename = "E5_tightness")]
    E5,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 5] = [Self::E1, Self::E2, Self::E3, Self::E4, Self::E5];

    pub fn name(self) -> &'static str {
        match self {
            Self::E1 => "E1_denoise_bounds",
            Self::E2 => "E2_alignment",
            Self::E3 => "E3_adaptivity",
            Self::E4 => "E4_sysid",
            Self::E5 => "E5_tightness",
        }
    }

    pub fn short(self) -> &'static str {
        &self.name()[..2]
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentId {
    type Err = BenchError;

    /// Accepts the full name or the `E1`..`E5` prefix, case-insensitively.
    fn from_str(s: &str) -> BenchResult<Self> {
        Self::ALL
            .into_iter()
            .find(|id| s.eq_ignore_ascii_case(id.name()) || s.eq_ignore_ascii_case(id.short()))
            .ok_or_else(|| BenchError::config(format!("unknown experiment `{s}` (expected E1..E5)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Lse,
    Rlse,
    Tlse,
    Nuclear,
    Tnuclear,
    Rsc,
}

impl Estimator {
    pub fn name(self) -> &'static str {
        match self {
            Self::Lse => "lse",
            Self::Rlse => "rlse",
            Self::Tlse => "tlse",
            Self::Nuclear => "nuclear",
            Self::Tnuclear => "tnuclear",
            Self::Rsc => "rsc",
        }
    }
}

/// Rank regime of the alignment and adaptivity experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    #[default]
    LowRank,
    HighRank,
}

/// Fully materialized configuration of one experiment run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment_id: ExperimentId,
    pub variant: Variant,
    pub d: usize,
    pub r: usize,
    pub n: usize,
    pub sigma: f64,
    pub b_grid: Vec<f64>,
    pub trials: usize,
    pub delta: f64,
    pub master_seed: u64,
    pub output_dir: PathBuf,
    pub include_estimators: Vec<Estimator>,
    pub tau_grid: Vec<f64>,
    pub n_grid: Vec<usize>,
    pub d_grid: Vec<usize>,
    /// Worker threads; 0 uses every available core.
    pub workers: usize,
    pub solver: SolverConfig,
}

/// On-disk schema; every key optional, unknown keys rejected.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    experiment_id: Option<ExperimentId>,
    variant: Option<Variant>,
    d: Option<usize>,
    r: Option<usize>,
    n: Option<usize>,
    sigma: Option<f64>,
    b_grid: Option<Vec<f64>>,
    trials: Option<usize>,
    delta: Option<f64>,
    master_seed: Option<u64>,
    output_dir: Option<PathBuf>,
    include_estimators: Option<Vec<Estimator>>,
    tau_grid: Option<Vec<f64>>,
    n_grid: Option<Vec<usize>>,
    d_grid: Option<Vec<usize>>,
    workers: Option<usize>,
    solver: Option<SolverConfig>,
}

pub const DEFAULT_DELTA: f64 = 0.05;
pub const DEFAULT_SEED: u64 = 20240601;
const B_GRID: [f64; 7] = [0.1, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0];

impl ExperimentConfig {
    pub fn defaults(id: ExperimentId, variant: Variant) -> Self {
        let mut cfg = ExperimentConfig {
            experiment_id: id,
            variant,
            d: 50,
            r: 10,
            n: 1000,
            sigma: 0.1,
            b_grid: B_GRID.to_vec(),
            trials: 30,
            delta: DEFAULT_DELTA,
            master_seed: DEFAULT_SEED,
            output_dir: PathBuf::from("results").join(id.short()),
            include_estimators: vec![Estimator::Rlse, Estimator::Tlse, Estimator::Rsc],
            tau_grid: Vec::new(),
            n_grid: Vec::new(),
            d_grid: Vec::new(),
            workers: 0,
            solver: SolverConfig::default(),
        };
        match id {
            ExperimentId::E1 => {
                cfg.sigma = 1.0;
                cfg.trials = 100;
                cfg.b_grid = Vec::new();
                cfg.include_estimators = Vec::new();
                cfg.tau_grid = vec![0.5, 1.0, 2.0, 5.0, 10.0];
            }
            ExperimentId::E2 => {
                cfg.b_grid = vec![1.5];
                cfg.include_estimators = vec![Estimator::Tlse, Estimator::Rsc];
            }
            ExperimentId::E3 | ExperimentId::E4 => {}
            ExperimentId::E5 => {
                cfg.n = 5000;
                cfg.sigma = 1.0;
                cfg.b_grid = Vec::new();
                cfg.include_estimators = vec![Estimator::Tlse];
                cfg.n_grid = vec![500, 1000, 2000, 4000, 8000];
                cfg.d_grid = vec![20, 30, 40, 50, 60];
            }
        }
        if variant == Variant::HighRank && matches!(id, ExperimentId::E2 | ExperimentId::E3) {
            cfg.r = 45;
            cfg.sigma = 0.4;
            if id == ExperimentId::E2 {
                cfg.b_grid = vec![0.5];
            }
        }
        cfg
    }

    fn overlay(mut self, f: ConfigFile) -> Self {
        macro_rules! take {
            ($($field:ident),*) => { $(if let Some(v) = f.$field { self.$field = v; })* };
        }
        take!(d, r, n, sigma, b_grid, trials, delta, master_seed, output_dir, include_estimators, tau_grid, n_grid, d_grid, workers, solver);
        self
    }

    pub fn validate(&self) -> BenchResult<()> {
        let bad = |msg: String| Err(BenchError::Config(msg));
        if self.trials < 1 {
            return bad("trials must be >= 1".into());
        }
        if self.d == 0 || self.r == 0 || self.r > self.d {
            return bad(format!("need 1 <= r <= d, got r={}, d={}", self.r, self.d));
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return bad(format!("sigma must be finite and >= 0, got {}", self.sigma));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta must lie in (0, 1), got {}", self.delta));
        }
        self.solver.validate().map_err(|e| BenchError::config(format!("solver: {e}")))?;
        let id = self.experiment_id;
        match id {
            ExperimentId::E1 => {
                if self.tau_grid.is_empty() || self.tau_grid.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
                    return bad("tau_grid must be nonempty with positive entries".into());
                }
            }
            ExperimentId::E2 | ExperimentId::E3 | ExperimentId::E4 => {
                if self.b_grid.is_empty() || self.b_grid.iter().any(|b| !(b.is_finite() && *b >= 0.0)) {
                    return bad("b_grid must be nonempty with finite entries >= 0".into());
                }
                if id == ExperimentId::E4 && self.b_grid.iter().any(|&b| b == 0.0) {
                    return bad("E4 needs b > 0: b = 0 gives a marginally stable system".into());
                }
                if self.n < self.d {
                    return bad(format!("need n >= d, got n={}, d={}", self.n, self.d));
                }
            }
            ExperimentId::E5 => {
                if self.n_grid.is_empty() || self.d_grid.is_empty() {
                    return bad("n_grid and d_grid must be nonempty".into());
                }
                if let Some(&n) = self.n_grid.iter().find(|&&n| n < self.d) {
                    return bad(format!("n_grid entry {n} is below d={}", self.d));
                }
                if let Some(&d) = self.d_grid.iter().find(|&&d| d < self.r || d > self.n) {
                    return bad(format!("d_grid entry {d} must lie in r..=n ({}..={})", self.r, self.n));
                }
            }
        }
        if id != ExperimentId::E1 && self.include_estimators.is_empty() {
            return bad("include_estimators must be nonempty".into());
        }
        if id == ExperimentId::E4 {
            if let Some(e) = self.include_estimators.iter().find(|e| matches!(e, Estimator::Nuclear | Estimator::Tnuclear)) {
                return bad(format!("estimator `{}` is defined for regression only", e.name()));
            }
        }
        if self.include_estimators.contains(&Estimator::Tnuclear) && self.delta >= 0.5 {
            return bad("tnuclear needs delta < 0.5".into());
        }
        Ok(())
    }
}

/// Command-line inputs to [`resolve`]; explicit flags win over `--set`,
/// which wins over the file.
#[derive(Debug, Clone, Default)]
pub struct ConfigSources {
    pub file: Option<PathBuf>,
    pub sets: Vec<String>,
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
}

fn read_object(path: &Path) -> BenchResult<Map<String, Value>> {
    let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
    match serde_json::from_str::<Value>(&text) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err(BenchError::config(format!("{}: top level must be a JSON object", path.display()))),
        Err(e) => Err(BenchError::config(format!("{}: {e}", path.display()))),
    }
}

/// Parses `key=value`; the value is read as JSON when it parses, else as a string.
pub fn parse_assignment(s: &str) -> BenchResult<(String, Value)> {
    let (key, raw) = s
        .split_once('=')
        .ok_or_else(|| BenchError::config(format!("expected key=value, got `{s}`")))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(BenchError::config(format!("empty key in `{s}`")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    Ok((key.to_string(), value))
}

pub fn resolve(id: ExperimentId, sources: &ConfigSources) -> BenchResult<ExperimentConfig> {
    let mut map = match &sources.file {
        Some(path) => read_object(path)?,
        None => Map::new(),
    };
    for s in &sources.sets {
        let (k, v) = parse_assignment(s)?;
        map.insert(k, v);
    }
    if let Some(seed) = sources.seed {
        map.insert("master_seed".into(), seed.into());
    }
    if let Some(trials) = sources.trials {
        map.insert("trials".into(), trials.into());
    }
    if let Some(out) = &sources.out {
        map.insert("output_dir".into(), Value::String(out.display().to_string()));
    }
    if let Some(w) = sources.workers {
        map.insert("workers".into(), w.into());
    }
    from_map(id, map)
}

/// Materializes a config from a JSON object of overrides.
pub fn from_map(id: ExperimentId, map: Map<String, Value>) -> BenchResult<ExperimentConfig> {
    let file: ConfigFile = serde_json::from_value(Value::Object(map)).map_err(|e| BenchError::config(e.to_string()))?;
    if let Some(declared) = file.experiment_id {
        if declared != id {
            return Err(BenchError::config(format!("config declares {declared}, command asks for {id}")));
        }
    }
    let variant = file.variant.unwrap_or_default();
    if variant == Variant::HighRank && !matches!(id, ExperimentId::E2 | ExperimentId::E3) {
        return Err(BenchError::config(format!("variant high_rank applies to E2 and E3, not {id}")));
    }
    let cfg = ExperimentConfig::defaults(id, variant).overlay(file);
    cfg.validate()?;
    Ok(cfg)
}
