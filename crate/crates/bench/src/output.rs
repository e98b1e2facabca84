//! CSV and JSON artifacts. Floats are written with `Display`, which is the
//! shortest decimal that round-trips.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{BenchError, BenchResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schema {
    Trials,
    Summary,
    DenoiseBounds,
    DenoiseTrials,
    AlignmentTable,
    TightnessBounds,
}

impl Schema {
    pub fn header(self) -> &'static [&'static str] {
        match self {
            Schema::Trials => &["experiment", "scenario", "trial", "estimator", "rel_error", "frob_error_sq", "effective_rank", "threshold"],
            Schema::Summary => &[
                "experiment",
                "scenario",
                "estimator",
                "mean_rel_error",
                "std_rel_error",
                "max_rel_error",
                "mean_effective_rank",
            ],
            Schema::DenoiseBounds => &["tau", "new_bound_mean", "chatterjee_bound_mean"],
            Schema::DenoiseTrials => &["trial", "tau", "new_bound", "chatterjee_bound", "z_op_norm", "a_frob_sq"],
            Schema::AlignmentTable => &["b", "estimator", "error_avg", "error_std", "error_max", "worst_shift"],
            Schema::TightnessBounds => &["sweep", "n", "d", "mean_frob_error_sq", "tlse_upper", "rlse_upper"],
        }
    }
}

/// A row type bound to one schema.
pub trait CsvRecord {
    const SCHEMA: Schema;
    fn fields(&self) -> Vec<String>;
}

fn num(v: f64) -> String {
    v.to_string()
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One (scenario, trial, estimator) outcome. A failed trial keeps its row
/// with `NaN` errors and empty rank and threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub experiment: String,
    pub scenario: String,
    pub trial: usize,
    pub estimator: String,
    pub rel_error: f64,
    pub frob_error_sq: f64,
    pub effective_rank: Option<usize>,
    pub threshold: Option<f64>,
}

impl TrialRecord {
    pub fn failed(&self) -> bool {
        self.effective_rank.is_none()
    }
}

impl CsvRecord for TrialRecord {
    const SCHEMA: Schema = Schema::Trials;
    fn fields(&self) -> Vec<String> {
        vec![
            self.experiment.clone(),
            self.scenario.clone(),
            self.trial.to_string(),
            self.estimator.clone(),
            num(self.rel_error),
            num(self.frob_error_sq),
            opt(self.effective_rank),
            opt(self.threshold),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub experiment: String,
    pub scenario: String,
    pub estimator: String,
    pub mean_rel_error: f64,
    pub std_rel_error: f64,
    pub max_rel_error: f64,
    pub mean_effective_rank: f64,
}

impl CsvRecord for SummaryRecord {
    const SCHEMA: Schema = Schema::Summary;
    fn fields(&self) -> Vec<String> {
        vec![
            self.experiment.clone(),
            self.scenario.clone(),
            self.estimator.clone(),
            num(self.mean_rel_error),
            num(self.std_rel_error),
            num(self.max_rel_error),
            num(self.mean_effective_rank),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenoiseBoundRecord {
    pub tau: f64,
    pub new_bound_mean: f64,
    pub chatterjee_bound_mean: f64,
}

impl CsvRecord for DenoiseBoundRecord {
    const SCHEMA: Schema = Schema::DenoiseBounds;
    fn fields(&self) -> Vec<String> {
        vec![num(self.tau), num(self.new_bound_mean), num(self.chatterjee_bound_mean)]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenoiseTrialRecord {
    pub trial: usize,
    pub tau: f64,
    pub new_bound: f64,
    pub chatterjee_bound: f64,
    pub z_op_norm: f64,
    pub a_frob_sq: f64,
}

impl CsvRecord for DenoiseTrialRecord {
    const SCHEMA: Schema = Schema::DenoiseTrials;
    fn fields(&self) -> Vec<String> {
        vec![
            self.trial.to_string(),
            num(self.tau),
            num(self.new_bound),
            num(self.chatterjee_bound),
            num(self.z_op_norm),
            num(self.a_frob_sq),
        ]
    }
}

/// Mean, sample std and max of the per-shift mean relative errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentRecord {
    pub b: f64,
    pub estimator: String,
    pub error_avg: f64,
    pub error_std: f64,
    pub error_max: f64,
    pub worst_shift: usize,
}

impl CsvRecord for AlignmentRecord {
    const SCHEMA: Schema = Schema::AlignmentTable;
    fn fields(&self) -> Vec<String> {
        vec![
            num(self.b),
            self.estimator.clone(),
            num(self.error_avg),
            num(self.error_std),
            num(self.error_max),
            self.worst_shift.to_string(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TightnessRecord {
    pub sweep: String,
    pub n: usize,
    pub d: usize,
    pub mean_frob_error_sq: f64,
    pub tlse_upper: f64,
    pub rlse_upper: f64,
}

impl CsvRecord for TightnessRecord {
    const SCHEMA: Schema = Schema::TightnessBounds;
    fn fields(&self) -> Vec<String> {
        vec![
            self.sweep.clone(),
            self.n.to_string(),
            self.d.to_string(),
            num(self.mean_frob_error_sq),
            num(self.tlse_upper),
            num(self.rlse_upper),
        ]
    }
}

/// Serializes `records` under `schema` to CSV bytes (UTF-8, LF).
pub fn to_csv_bytes<R: CsvRecord>(records: &[R], schema: Schema) -> BenchResult<Vec<u8>> {
    if R::SCHEMA != schema {
        return Err(BenchError::config(format!("records of schema {:?} written as {schema:?}", R::SCHEMA)));
    }
    let header = schema.header();
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let io = |e: csv::Error| BenchError::io("<csv buffer>", e);
    w.write_record(header).map_err(io)?;
    for r in records {
        let fields = r.fields();
        if fields.len() != header.len() {
            return Err(BenchError::config(format!("row has {} fields, schema {schema:?} has {}", fields.len(), header.len())));
        }
        w.write_record(&fields).map_err(io)?;
    }
    w.into_inner().map_err(|e| BenchError::io("<csv buffer>", e))
}

pub fn emit_csv<R: CsvRecord>(records: &[R], schema: Schema, path: &Path) -> BenchResult<()> {
    let bytes = to_csv_bytes(records, schema)?;
    write_bytes(path, &bytes)
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> BenchResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| BenchError::io(parent, e))?;
    }
    let mut f = fs::File::create(path).map_err(|e| BenchError::io(path, e))?;
    f.write_all(bytes).map_err(|e| BenchError::io(path, e))
}

/// Reads a CSV written under `schema`, checking the header first.
pub fn read_csv<R: for<'de> Deserialize<'de>>(path: &Path, schema: Schema) -> BenchResult<Vec<R>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| BenchError::io(path, e))?;
    let header = rdr.headers().map_err(|e| BenchError::io(path, e))?;
    if !header.iter().eq(schema.header().iter().copied()) {
        return Err(BenchError::config(format!("{}: header does not match {schema:?}", path.display())));
    }
    rdr.deserialize().collect::<Result<Vec<R>, _>>().map_err(|e| BenchError::io(path, e))
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> BenchResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| BenchError::io(path, e))?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}
