//! The five experiment families. Every trial draws from streams keyed by
//! `(master_seed, scenario, trial)`, so results do not depend on the number
//! of workers or on scheduling order.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use nalgebra::DVector;
use rankadapt::bounds::{self, BoundInputs, RankRange};
use rankadapt::estimators::{self, CovarianceSource, Design, EstimateReport, SolverConfig};
use rankadapt::problem::{self, ProblemInstance, SpectrumOffset, SpectrumProfile};
use rankadapt::rng::{Stream, StreamKey};
use rankadapt::spectral::{self, DenseMatrix};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Estimator, ExperimentConfig, ExperimentId};
use crate::error::{BenchError, BenchResult};
use crate::output::{
    self, AlignmentRecord, DenoiseBoundRecord, DenoiseTrialRecord, Schema, SummaryRecord, TightnessRecord, TrialRecord,
};

pub const VERSION: &str = env!("RANKADAPT_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub scenario: String,
    pub trial: usize,
    pub estimator: String,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentOutput {
    pub trials: Vec<TrialRecord>,
    pub summary: Vec<SummaryRecord>,
    pub denoise: Vec<DenoiseBoundRecord>,
    pub denoise_trials: Vec<DenoiseTrialRecord>,
    pub alignment: Vec<AlignmentRecord>,
    pub tightness: Vec<TightnessRecord>,
    pub failures: Vec<Failure>,
    pub duration_secs: f64,
}

#[derive(Serialize)]
struct Manifest<'a> {
    experiment: ExperimentId,
    version: &'static str,
    duration_secs: f64,
    config: &'a ExperimentConfig,
    rows: usize,
    files: Vec<String>,
    failures: &'a [Failure],
}

pub fn run_experiment(cfg: &ExperimentConfig) -> BenchResult<ExperimentOutput> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| BenchError::config(format!("worker pool: {e}")))?;
    let start = Instant::now();
    let mut out = pool.install(|| match cfg.experiment_id {
        ExperimentId::E1 => run_denoise(cfg),
        ExperimentId::E2 => run_alignment(cfg),
        ExperimentId::E3 => run_adaptivity(cfg),
        ExperimentId::E4 => run_sysid(cfg),
        ExperimentId::E5 => run_tightness(cfg),
    });
    out.summary = summarize(cfg.experiment_id, &out.trials);
    out.duration_secs = start.elapsed().as_secs_f64();
    Ok(out)
}

/// Writes the CSV artifacts and the manifest into `dir`; returns the paths.
pub fn write_artifacts(cfg: &ExperimentConfig, out: &ExperimentOutput, dir: &Path) -> BenchResult<Vec<PathBuf>> {
    let mut files = vec![dir.join("trials.csv"), dir.join("summary.csv")];
    output::emit_csv(&out.trials, Schema::Trials, &files[0])?;
    output::emit_csv(&out.summary, Schema::Summary, &files[1])?;
    match cfg.experiment_id {
        ExperimentId::E1 => {
            files.push(dir.join("e1_bounds.csv"));
            output::emit_csv(&out.denoise, Schema::DenoiseBounds, files.last().unwrap())?;
            files.push(dir.join("e1_trial_bounds.csv"));
            output::emit_csv(&out.denoise_trials, Schema::DenoiseTrials, files.last().unwrap())?;
        }
        ExperimentId::E2 => {
            files.push(dir.join("e2_table.csv"));
            output::emit_csv(&out.alignment, Schema::AlignmentTable, files.last().unwrap())?;
        }
        ExperimentId::E5 => {
            files.push(dir.join("e5_bounds.csv"));
            output::emit_csv(&out.tightness, Schema::TightnessBounds, files.last().unwrap())?;
        }
        ExperimentId::E3 | ExperimentId::E4 => {}
    }
    let manifest_path = dir.join("manifest.json");
    let manifest = Manifest {
        experiment: cfg.experiment_id,
        version: VERSION,
        duration_secs: out.duration_secs,
        config: cfg,
        rows: out.trials.len(),
        files: files.iter().filter_map(|p| p.file_name()).map(|f| f.to_string_lossy().into_owned()).collect(),
        failures: &out.failures,
    };
    output::write_json(&manifest, &manifest_path)?;
    files.push(manifest_path);
    Ok(files)
}

/// Per-scenario state shared by all of its trials.
struct Scenario<T> {
    label: String,
    setup: Result<T, String>,
}

fn fmt_scenario(pairs: &[(&str, String)]) -> String {
    pairs.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(";")
}

fn failed_record(id: ExperimentId, scenario: &str, trial: usize, estimator: &str) -> TrialRecord {
    TrialRecord {
        experiment: id.name().into(),
        scenario: scenario.into(),
        trial,
        estimator: estimator.into(),
        rel_error: f64::NAN,
        frob_error_sq: f64::NAN,
        effective_rank: None,
        threshold: None,
    }
}

/// Rows for one trial plus failure messages in row order.
type TrialRows = (Vec<TrialRecord>, Vec<Failure>);

fn report_rows(
    cfg: &ExperimentConfig,
    scenario: &str,
    trial: usize,
    results: Vec<(Estimator, rankadapt::Result<EstimateReport>)>,
) -> TrialRows {
    let id = cfg.experiment_id;
    let mut rows = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (est, res) in results {
        match res {
            Ok(rep) => rows.push(TrialRecord {
                experiment: id.name().into(),
                scenario: scenario.into(),
                trial,
                estimator: est.name().into(),
                rel_error: rep.relative_error.unwrap_or(f64::NAN),
                frob_error_sq: rep.frob_error_sq().unwrap_or(f64::NAN),
                effective_rank: Some(rep.effective_rank),
                threshold: rep.threshold_used,
            }),
            Err(e) => {
                rows.push(failed_record(id, scenario, trial, est.name()));
                failures.push(Failure { scenario: scenario.into(), trial, estimator: est.name().into(), message: e.to_string() });
            }
        }
    }
    (rows, failures)
}

fn setup_failure_rows(cfg: &ExperimentConfig, scenario: &str, trial: usize, message: &str) -> TrialRows {
    let rows: Vec<_> =
        cfg.include_estimators.iter().map(|e| failed_record(cfg.experiment_id, scenario, trial, e.name())).collect();
    let failures = cfg
        .include_estimators
        .iter()
        .map(|e| Failure { scenario: scenario.into(), trial, estimator: e.name().into(), message: message.into() })
        .collect();
    (rows, failures)
}

/// Runs `trial_fn` over every (scenario, trial) pair in parallel and
/// concatenates the rows in (scenario, trial) order.
fn run_trials<T: Sync>(
    cfg: &ExperimentConfig,
    scenarios: &[Scenario<T>],
    trial_fn: impl Fn(&T, &str, usize, usize) -> rankadapt::Result<Vec<(Estimator, rankadapt::Result<EstimateReport>)>> + Sync,
) -> (Vec<TrialRecord>, Vec<Failure>) {
    let jobs: Vec<(usize, usize)> = (0..scenarios.len()).flat_map(|s| (0..cfg.trials).map(move |t| (s, t))).collect();
    let per_job: Vec<TrialRows> = jobs
        .par_iter()
        .map(|&(s, t)| {
            let sc = &scenarios[s];
            match &sc.setup {
                Err(msg) => setup_failure_rows(cfg, &sc.label, t, msg),
                Ok(state) => match trial_fn(state, &sc.label, s, t) {
                    Ok(results) => report_rows(cfg, &sc.label, t, results),
                    Err(e) => setup_failure_rows(cfg, &sc.label, t, &e.to_string()),
                },
            }
        })
        .collect();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (r, f) in per_job {
        rows.extend(r);
        failures.extend(f);
    }
    (rows, failures)
}

/// Evaluates one estimator on an instance whose design has been factored.
pub fn apply_estimator(
    est: Estimator,
    design: &Design,
    inst: &ProblemInstance,
    r: usize,
    delta: f64,
    solver: &SolverConfig,
) -> rankadapt::Result<EstimateReport> {
    let report = match est {
        Estimator::Lse => EstimateReport::new(design.lse(&inst.y)?, None)?,
        Estimator::Rlse => design.r_lse(&inst.y, r.min(inst.d_x()).min(inst.d_y()))?,
        Estimator::Tlse => design.t_lse(&inst.y, inst.setting, inst.sigma, delta, CovarianceSource::Empirical)?,
        Estimator::Nuclear => {
            let mu = estimators::nuclear_penalty(design.n(), design.d_x(), inst.d_y(), inst.sigma, delta, design.lambda_max())?;
            let sol = estimators::nuclear_norm_estimate(&inst.x, &inst.y, mu, solver)?;
            EstimateReport::new(sol.estimate, None)?
        }
        Estimator::Tnuclear => estimators::thresholded_nuclear(inst, delta, solver)?,
        Estimator::Rsc => design.rsc(&inst.y, inst.sigma)?,
    };
    Ok(report.scored(&inst.a))
}

fn apply_all(cfg: &ExperimentConfig, design: &Design, inst: &ProblemInstance) -> Vec<(Estimator, rankadapt::Result<EstimateReport>)> {
    cfg.include_estimators
        .iter()
        .map(|&e| (e, apply_estimator(e, design, inst, cfg.r, cfg.delta, &cfg.solver)))
        .collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample standard deviation; zero for a single value.
fn sample_std(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

fn max(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NAN, f64::max)
}

/// Per-(scenario, estimator) statistics over successful trials, in order of
/// first appearance.
pub fn summarize(id: ExperimentId, trials: &[TrialRecord]) -> Vec<SummaryRecord> {
    let mut keys: Vec<(&str, &str)> = Vec::new();
    for t in trials {
        let k = (t.scenario.as_str(), t.estimator.as_str());
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(scenario, estimator)| {
            let ok: Vec<&TrialRecord> =
                trials.iter().filter(|t| t.scenario == scenario && t.estimator == estimator && !t.failed()).collect();
            let errs: Vec<f64> = ok.iter().map(|t| t.rel_error).collect();
            let ranks: Vec<f64> = ok.iter().map(|t| t.effective_rank.unwrap() as f64).collect();
            SummaryRecord {
                experiment: id.name().into(),
                scenario: scenario.into(),
                estimator: estimator.into(),
                mean_rel_error: mean(&errs),
                std_rel_error: sample_std(&errs),
                max_rel_error: max(&errs),
                mean_effective_rank: mean(&ranks),
            }
        })
        .collect()
}

fn identity(d: usize) -> DenseMatrix {
    DenseMatrix::identity(d, d)
}

fn run_denoise(cfg: &ExperimentConfig) -> ExperimentOutput {
    let id = cfg.experiment_id;
    let per_trial: Vec<(Vec<TrialRecord>, Vec<DenoiseTrialRecord>, Vec<Failure>)> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let key = StreamKey::new(cfg.master_seed, 0, trial as u64);
            let mut rows = Vec::new();
            let mut bounds_rows = Vec::new();
            let mut failures = Vec::new();
            let result = (|| -> rankadapt::Result<()> {
                let base = problem::uniform_matrix(cfg.d, cfg.d, -1.0, 1.0, &mut key.rng(Stream::Target));
                let a = spectral::truncate_rank(&base, cfg.r)?;
                let z = problem::gaussian_matrix(cfg.d, cfg.d, cfg.sigma, &mut key.rng(Stream::Noise));
                let abar = &a + &z;
                let zn = spectral::operator_norm(&z)?;
                let a_spec = spectral::singular_values(&a)?;
                let abar_spec = spectral::singular_values(&abar)?;
                let nuclear: f64 = a_spec.iter().sum();
                let a_frob_sq = a.norm_squared();
                for &tau in &cfg.tau_grid {
                    let ours = bounds::adaptive_denoise_bound(&abar_spec, &a_spec, zn, tau)?;
                    let theirs = bounds::chatterjee_bound(tau, zn, nuclear)?;
                    bounds_rows.push(DenoiseTrialRecord {
                        trial,
                        tau,
                        new_bound: ours.value,
                        chatterjee_bound: theirs,
                        z_op_norm: zn,
                        a_frob_sq,
                    });
                    let xi = (1.0 + tau) * zn;
                    let est = spectral::hard_threshold(&abar, xi)?;
                    let err = (&est - &a).norm_squared();
                    rows.push(TrialRecord {
                        experiment: id.name().into(),
                        scenario: fmt_scenario(&[("tau", tau.to_string())]),
                        trial,
                        estimator: "usvt".into(),
                        rel_error: err / a_frob_sq,
                        frob_error_sq: err,
                        effective_rank: Some(abar_spec.iter().filter(|&&s| s > xi).count()),
                        threshold: Some(xi),
                    });
                }
                Ok(())
            })();
            if let Err(e) = result {
                rows.clear();
                bounds_rows.clear();
                for &tau in &cfg.tau_grid {
                    let scenario = fmt_scenario(&[("tau", tau.to_string())]);
                    rows.push(failed_record(id, &scenario, trial, "usvt"));
                    failures.push(Failure { scenario, trial, estimator: "usvt".into(), message: e.to_string() });
                }
            }
            (rows, bounds_rows, failures)
        })
        .collect();

    let mut out = ExperimentOutput::default();
    // reorder to (tau, trial)
    for ti in 0..cfg.tau_grid.len() {
        for (rows, _, _) in &per_trial {
            out.trials.push(rows[ti].clone());
        }
    }
    for (_, b, f) in per_trial {
        out.denoise_trials.extend(b);
        out.failures.extend(f);
    }
    out.failures.sort_by(|a, b| a.scenario.cmp(&b.scenario).then(a.trial.cmp(&b.trial)));
    for &tau in &cfg.tau_grid {
        let at: Vec<&DenoiseTrialRecord> = out.denoise_trials.iter().filter(|r| r.tau == tau).collect();
        out.denoise.push(DenoiseBoundRecord {
            tau,
            new_bound_mean: mean(&at.iter().map(|r| r.new_bound).collect::<Vec<_>>()),
            chatterjee_bound_mean: mean(&at.iter().map(|r| r.chatterjee_bound).collect::<Vec<_>>()),
        });
    }
    out.denoise_trials.sort_by(|a, b| a.trial.cmp(&b.trial));
    out
}

struct AlignmentState {
    design: Arc<Design>,
    a: DenseMatrix,
}

fn squares_covariance(d: usize) -> DenseMatrix {
    DenseMatrix::from_diagonal(&DVector::from_fn(d, |j, _| ((j + 1) * (j + 1)) as f64))
}

fn run_alignment(cfg: &ExperimentConfig) -> ExperimentOutput {
    let d = cfg.d;
    let design_key = StreamKey::new(cfg.master_seed, 0, 0);
    let shared = problem::sample_design(&squares_covariance(d), cfg.n, &mut design_key.rng(Stream::Design))
        .and_then(|x| Ok((x.clone(), Arc::new(Design::new(x)?))));
    let specs: Vec<(usize, f64, usize)> = cfg
        .b_grid
        .iter()
        .enumerate()
        .flat_map(|(bi, &b)| (0..=d).map(move |shift| (bi, b, shift)))
        .collect();
    let scenarios: Vec<Scenario<AlignmentState>> = specs
        .par_iter()
        .map(|&(bi, b, shift)| {
            let label = fmt_scenario(&[("b", b.to_string()), ("shift", shift.to_string())]);
            let setup = match &shared {
                Err(e) => Err(e.to_string()),
                Ok((x, design)) => {
                    // one U per b, so scenarios differ only in alignment
                    let target_key = StreamKey::new(cfg.master_seed, bi as u64, 0);
                    SpectrumProfile::new(d, cfg.r, b, SpectrumOffset::J)
                        .and_then(|p| problem::make_aligned_target(x, &p, shift, &mut target_key.rng(Stream::Target)))
                        .map(|a| AlignmentState { design: Arc::clone(design), a })
                        .map_err(|e| e.to_string())
                }
            };
            Scenario { label, setup }
        })
        .collect();

    let (trials, failures) = run_trials(cfg, &scenarios, |st, _, s, t| {
        let key = StreamKey::new(cfg.master_seed, s as u64, t as u64);
        let inst = problem::sample_observations(&st.a, st.design.x().clone(), cfg.sigma, &mut key.rng(Stream::Noise))?;
        Ok(apply_all(cfg, &st.design, &inst))
    });
    let summary = summarize(cfg.experiment_id, &trials);
    let mut alignment = Vec::new();
    for (bi, &b) in cfg.b_grid.iter().enumerate() {
        for est in &cfg.include_estimators {
            let means: Vec<f64> = (0..=d)
                .map(|shift| {
                    let label = &scenarios[bi * (d + 1) + shift].label;
                    summary
                        .iter()
                        .find(|s| &s.scenario == label && s.estimator == est.name())
                        .map_or(f64::NAN, |s| s.mean_rel_error)
                })
                .collect();
            let worst = (0..means.len()).fold(0, |w, i| if means[i] > means[w] || means[w].is_nan() { i } else { w });
            alignment.push(AlignmentRecord {
                b,
                estimator: est.name().into(),
                error_avg: mean(&means),
                error_std: sample_std(&means),
                error_max: max(&means),
                worst_shift: worst,
            });
        }
    }
    ExperimentOutput { trials, failures, alignment, ..Default::default() }
}

fn b_label(b: f64) -> String {
    fmt_scenario(&[("b", b.to_string())])
}

fn run_adaptivity(cfg: &ExperimentConfig) -> ExperimentOutput {
    let d = cfg.d;
    let scenarios: Vec<Scenario<SpectrumProfile>> = cfg
        .b_grid
        .iter()
        .map(|&b| Scenario {
            label: b_label(b),
            setup: SpectrumProfile::new(d, cfg.r, b, SpectrumOffset::J).map_err(|e| e.to_string()),
        })
        .collect();
    // the same singular vectors, design and noise for every b in a given trial
    let (trials, failures) = run_trials(cfg, &scenarios, |profile, _, _, t| {
        let key = StreamKey::new(cfg.master_seed, 0, t as u64);
        let a = problem::make_target(profile, &mut key.rng(Stream::Target))?;
        let inst =
            problem::sample_regression(&a, &identity(d), cfg.n, cfg.sigma, &mut key.rng(Stream::Design), &mut key.rng(Stream::Noise))?;
        let design = Design::new(inst.x.clone())?;
        Ok(apply_all(cfg, &design, &inst))
    });
    ExperimentOutput { trials, failures, ..Default::default() }
}

fn run_sysid(cfg: &ExperimentConfig) -> ExperimentOutput {
    let d = cfg.d;
    let scenarios: Vec<Scenario<SpectrumProfile>> = cfg
        .b_grid
        .iter()
        .map(|&b| Scenario {
            label: b_label(b),
            setup: SpectrumProfile::new(d, cfg.r, b, SpectrumOffset::JPlus1).map_err(|e| e.to_string()),
        })
        .collect();
    let (trials, failures) = run_trials(cfg, &scenarios, |profile, _, _, t| {
        let key = StreamKey::new(cfg.master_seed, 0, t as u64);
        let a = problem::make_stable_symmetric(profile, &mut key.rng(Stream::Target))?;
        let inst = problem::simulate_lti(&a, cfg.n, cfg.sigma, &mut key.rng(Stream::Noise))?;
        let design = Design::new(inst.x.clone())?;
        Ok(apply_all(cfg, &design, &inst))
    });
    ExperimentOutput { trials, failures, ..Default::default() }
}

struct TightnessState {
    sweep: &'static str,
    n: usize,
    d: usize,
    a: DenseMatrix,
    design: Design,
}

fn run_tightness(cfg: &ExperimentConfig) -> ExperimentOutput {
    let specs: Vec<(&'static str, usize, usize)> = cfg
        .n_grid
        .iter()
        .map(|&n| ("n", n, cfg.d))
        .chain(cfg.d_grid.iter().map(|&d| ("d", cfg.n, d)))
        .collect();
    let scenarios: Vec<Scenario<TightnessState>> = specs
        .par_iter()
        .enumerate()
        .map(|(idx, &(sweep, n, d))| {
            let key = StreamKey::new(cfg.master_seed, idx as u64, 0);
            let label = fmt_scenario(&[("sweep", sweep.into()), ("n", n.to_string()), ("d", d.to_string())]);
            let setup = (|| -> rankadapt::Result<TightnessState> {
                let base = problem::uniform_matrix(d, d, 0.0, 1.0, &mut key.rng(Stream::Target));
                let a = spectral::truncate_rank(&base, cfg.r)?;
                let x = problem::sample_design(&identity(d), n, &mut key.rng(Stream::Design))?;
                Ok(TightnessState { sweep, n, d, a, design: Design::new(x)? })
            })()
            .map_err(|e| e.to_string());
            Scenario { label, setup }
        })
        .collect();
    let (trials, failures) = run_trials(cfg, &scenarios, |st, _, s, t| {
        let key = StreamKey::new(cfg.master_seed, s as u64, t as u64);
        let inst = problem::sample_observations(&st.a, st.design.x().clone(), cfg.sigma, &mut key.rng(Stream::Noise))?;
        Ok(apply_all(cfg, &st.design, &inst))
    });
    let primary = if cfg.include_estimators.contains(&Estimator::Tlse) { Estimator::Tlse } else { cfg.include_estimators[0] };
    let tightness = scenarios
        .iter()
        .filter_map(|sc| {
            let st = sc.setup.as_ref().ok()?;
            let errs: Vec<f64> = trials
                .iter()
                .filter(|t| t.scenario == sc.label && t.estimator == primary.name() && !t.failed())
                .map(|t| t.frob_error_sq)
                .collect();
            let inputs = BoundInputs {
                n: st.n as u64,
                delta: cfg.delta,
                sigma: cfg.sigma,
                d_x: st.d,
                d_y: st.d,
                r: cfg.r,
                target_spectrum: spectral::singular_values(&st.a).ok()?,
                cov_spectrum: vec![1.0; st.d],
            };
            Some(TightnessRecord {
                sweep: st.sweep.into(),
                n: st.n,
                d: st.d,
                mean_frob_error_sq: mean(&errs),
                tlse_upper: bounds::tlse_upper(&inputs, RankRange::OneToR).ok()?.value,
                rlse_upper: bounds::rlse_upper(&inputs).ok()?,
            })
        })
        .collect();
    ExperimentOutput { trials, failures, tightness, ..Default::default() }
}
