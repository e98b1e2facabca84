//! Command-line front end.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rankadapt::bounds::{self, BoundInputs, RankRange};
use rankadapt::estimators::{Design, SolverConfig};
use rankadapt::problem::{self, ProblemInstance, Setting, SpectrumOffset, SpectrumProfile};
use rankadapt::rng::{Stream, StreamKey};
use rankadapt::DenseMatrix;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{self, ConfigSources, Estimator, ExperimentId};
use crate::error::{BenchError, BenchResult};
use crate::experiments;
use crate::matrix_io;
use crate::output;

#[derive(Debug, Parser)]
#[command(name = "rankadapt", version = experiments::VERSION, about = "Rank-adaptive matrix estimation experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run an experiment family (E1..E5) and write CSV artifacts.
    Bench {
        experiment: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
        /// Override a config key, e.g. `--set b_grid=[0.5,1]`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
    },
    /// Generate a problem instance as CSV matrices plus JSON metadata.
    Gen(GenArgs),
    /// Run one estimator on a generated instance; prints a JSON report.
    Estimate {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, value_enum)]
        method: Estimator,
        #[arg(long)]
        rank: Option<usize>,
        #[arg(long, default_value_t = config::DEFAULT_DELTA)]
        delta: f64,
    },
    /// Evaluate every bound on a JSON set of inputs.
    Bounds {
        #[arg(long)]
        inputs: PathBuf,
        #[arg(long, value_enum, default_value_t = SettingArg::Regression)]
        setting: SettingArg,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        xi: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SettingArg {
    Regression,
    Sysid,
}

impl From<SettingArg> for Setting {
    fn from(s: SettingArg) -> Self {
        match s {
            SettingArg::Regression => Setting::Regression,
            SettingArg::Sysid => Setting::Sysid,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CovarianceArg {
    /// `Σ = I`.
    Identity,
    /// `Σ = diag(j²)`.
    Squares,
}

#[derive(Debug, Clone, clap::Args)]
pub struct GenArgs {
    #[arg(long, value_enum, default_value_t = SettingArg::Regression)]
    pub setting: SettingArg,
    #[arg(long, default_value_t = 20)]
    pub d: usize,
    #[arg(long, default_value_t = 5)]
    pub r: usize,
    #[arg(long, default_value_t = 1.0)]
    pub b: f64,
    #[arg(long, default_value_t = 500)]
    pub n: usize,
    #[arg(long, default_value_t = 0.1)]
    pub sigma: f64,
    #[arg(long, default_value_t = config::DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = CovarianceArg::Identity)]
    pub cov: CovarianceArg,
    #[arg(long)]
    pub out: PathBuf,
}

/// Sidecar describing a generated instance; matrix paths are relative to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceMeta {
    pub setting: Setting,
    pub sigma: f64,
    pub seed: u64,
    pub n: usize,
    pub d_x: usize,
    pub d_y: usize,
    pub profile: Option<SpectrumProfile>,
    pub a: String,
    pub x: String,
    pub y: String,
}

pub const INSTANCE_FILE: &str = "instance.json";

pub fn generate(args: &GenArgs) -> BenchResult<PathBuf> {
    let key = StreamKey::new(args.seed, 0, 0);
    let inst = match args.setting {
        SettingArg::Regression => {
            let profile = SpectrumProfile::new(args.d, args.r, args.b, SpectrumOffset::J)?;
            let a = problem::make_target(&profile, &mut key.rng(Stream::Target))?;
            let cov = match args.cov {
                CovarianceArg::Identity => DenseMatrix::identity(args.d, args.d),
                CovarianceArg::Squares => {
                    DenseMatrix::from_diagonal(&nalgebra::DVector::from_fn(args.d, |j, _| ((j + 1) * (j + 1)) as f64))
                }
            };
            (problem::regression_instance(&a, &cov, args.n, args.sigma, args.seed)?, profile)
        }
        SettingArg::Sysid => {
            let profile = SpectrumProfile::new(args.d, args.r, args.b, SpectrumOffset::JPlus1)?;
            let a = problem::make_stable_symmetric(&profile, &mut key.rng(Stream::Target))?;
            (problem::lti_instance(&a, args.n, args.sigma, args.seed)?, profile)
        }
    };
    write_instance(&inst.0, Some(inst.1), &args.out)
}

pub fn write_instance(inst: &ProblemInstance, profile: Option<SpectrumProfile>, dir: &Path) -> BenchResult<PathBuf> {
    let meta = InstanceMeta {
        setting: inst.setting,
        sigma: inst.sigma,
        seed: inst.seed,
        n: inst.n(),
        d_x: inst.d_x(),
        d_y: inst.d_y(),
        profile,
        a: "A.csv".into(),
        x: "X.csv".into(),
        y: "Y.csv".into(),
    };
    matrix_io::write_matrix(&dir.join(&meta.a), &inst.a)?;
    matrix_io::write_matrix(&dir.join(&meta.x), &inst.x)?;
    matrix_io::write_matrix(&dir.join(&meta.y), &inst.y)?;
    let path = dir.join(INSTANCE_FILE);
    output::write_json(&meta, &path)?;
    Ok(path)
}

/// Loads an instance from its metadata file or the directory holding it.
pub fn read_instance(path: &Path) -> BenchResult<(ProblemInstance, InstanceMeta)> {
    let meta_path = if path.is_dir() { path.join(INSTANCE_FILE) } else { path.to_path_buf() };
    let text = std::fs::read_to_string(&meta_path).map_err(|e| BenchError::io(&meta_path, e))?;
    let meta: InstanceMeta =
        serde_json::from_str(&text).map_err(|e| BenchError::config(format!("{}: {e}", meta_path.display())))?;
    let dir = meta_path.parent().unwrap_or(Path::new("."));
    let a = matrix_io::read_matrix(&dir.join(&meta.a), meta.d_x)?;
    let x = matrix_io::read_matrix(&dir.join(&meta.x), meta.d_x)?;
    let y = matrix_io::read_matrix(&dir.join(&meta.y), meta.d_y)?;
    let shapes_ok = a.shape() == (meta.d_y, meta.d_x) && x.shape() == (meta.n, meta.d_x) && y.shape() == (meta.n, meta.d_y);
    if !shapes_ok {
        return Err(BenchError::config(format!(
            "{}: matrix shapes A {:?}, X {:?}, Y {:?} disagree with metadata",
            meta_path.display(),
            a.shape(),
            x.shape(),
            y.shape()
        )));
    }
    let inst = ProblemInstance { a, x, y, sigma: meta.sigma, setting: meta.setting, seed: meta.seed };
    Ok((inst, meta))
}

pub fn estimate(instance: &Path, method: Estimator, rank: Option<usize>, delta: f64) -> BenchResult<Value> {
    let (inst, meta) = read_instance(instance)?;
    if matches!(method, Estimator::Nuclear | Estimator::Tnuclear) && inst.setting != Setting::Regression {
        return Err(BenchError::config(format!("method `{}` is defined for regression instances", method.name())));
    }
    let r = match (method, rank, meta.profile) {
        (_, Some(r), _) => r,
        (_, None, Some(p)) => p.r,
        (Estimator::Rlse, None, None) => return Err(BenchError::config("rlse needs --rank")),
        (_, None, None) => 1,
    };
    let design = Design::new(inst.x.clone())?;
    let report = experiments::apply_estimator(method, &design, &inst, r, delta, &SolverConfig::default())?;
    serde_json::to_value(&report).map_err(|e| BenchError::io("<stdout>", e))
}

fn bound_json(v: rankadapt::Result<bounds::BoundValue>) -> Value {
    match v {
        Ok(b) => json!({ "value": b.value, "minimizer_k": b.minimizer_k }),
        Err(e) => json!({ "error": e.to_string() }),
    }
}

fn scalar_json<T: Serialize>(v: rankadapt::Result<T>) -> Value {
    match v {
        Ok(x) => json!(x),
        Err(e) => json!({ "error": e.to_string() }),
    }
}

pub fn evaluate_bounds(inputs: &BoundInputs, setting: Setting, epsilon: Option<f64>, xi: Option<f64>) -> BenchResult<Value> {
    inputs.validate()?;
    let ks: Vec<usize> = (1..=inputs.r).collect();
    let per_k = |f: fn(usize, &BoundInputs) -> rankadapt::Result<f64>| -> BenchResult<Vec<f64>> {
        ks.iter().map(|&k| f(k, inputs).map_err(BenchError::from)).collect()
    };
    let mut out = json!({
        "setting": setting,
        "inputs": inputs,
        "constants": {
            "denoise": bounds::DENOISE_CONST,
            "tlse": bounds::TLSE_CONST,
            "rlse": bounds::RLSE_CONST,
            "lower_bound_regression": bounds::lower_bound_constant(Setting::Regression),
            "lower_bound_sysid": bounds::lower_bound_constant(Setting::Sysid),
        },
        "err_reg": per_k(bounds::err_reg)?,
        "err_lti": per_k(bounds::err_lti)?,
        "gamma": bound_json(bounds::gamma_delta(inputs, RankRange::OneToR)),
        "gamma_with_zero_rank": bound_json(bounds::gamma_delta(inputs, RankRange::ZeroToR)),
        "beta": bound_json(bounds::beta_delta(inputs, RankRange::OneToR)),
        "beta_with_zero_rank": bound_json(bounds::beta_delta(inputs, RankRange::ZeroToR)),
        "rlse_upper": scalar_json(bounds::rlse_upper(inputs)),
        "tlse_upper": bound_json(bounds::tlse_upper(inputs, RankRange::OneToR)),
        "notes": [
            "err_reg, err_lti, gamma, beta and theorem_full_lb are rates: universal constants are omitted",
            "tlse_upper, rlse_upper and the sample-complexity threshold carry their explicit constants",
        ],
    });
    let obj = out.as_object_mut().expect("object literal");
    if let Some(eps) = epsilon {
        obj.insert("epsilon".into(), json!(eps));
        obj.insert(
            "sample_complexity_lb".into(),
            scalar_json(bounds::sample_complexity_lb(inputs, setting, eps, RankRange::OneToR)),
        );
        obj.insert("theorem_full_lb".into(), scalar_json(bounds::theorem_full_lb(inputs, setting, eps)));
    }
    if let Some(xi) = xi {
        obj.insert("xi".into(), json!(xi));
        obj.insert(
            "theorem1_bound".into(),
            bound_json(bounds::theorem1_bound(&inputs.target_spectrum, xi, inputs.r, RankRange::OneToR)),
        );
    }
    Ok(out)
}

fn read_bound_inputs(path: &Path) -> BenchResult<BoundInputs> {
    let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| BenchError::config(format!("{}: {e}", path.display())))
}

fn print_json(v: &Value) -> BenchResult<()> {
    let text = serde_json::to_string_pretty(v).map_err(|e| BenchError::io("<stdout>", e))?;
    println!("{text}");
    Ok(())
}

pub fn run(cli: Cli) -> BenchResult<()> {
    match cli.command {
        Command::Bench { experiment, config, seed, trials, out, workers, sets } => {
            let id: ExperimentId = experiment.parse()?;
            let sources = ConfigSources { file: config, sets, seed, trials, out, workers };
            let cfg = config::resolve(id, &sources)?;
            let result = experiments::run_experiment(&cfg)?;
            let files = experiments::write_artifacts(&cfg, &result, &cfg.output_dir)?;
            eprintln!(
                "{}: {} rows, {} failures, {:.2}s",
                id,
                result.trials.len(),
                result.failures.len(),
                result.duration_secs
            );
            for f in files {
                println!("{}", f.display());
            }
            Ok(())
        }
        Command::Gen(args) => {
            let path = generate(&args)?;
            println!("{}", path.display());
            Ok(())
        }
        Command::Estimate { instance, method, rank, delta } => print_json(&estimate(&instance, method, rank, delta)?),
        Command::Bounds { inputs, setting, epsilon, xi } => {
            let inputs = read_bound_inputs(&inputs)?;
            print_json(&evaluate_bounds(&inputs, setting.into(), epsilon, xi)?)
        }
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
