//! Experiment specs, run orchestration and metric output.

mod csv;
pub mod synthetic;

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{normalize_rows_l2, read_libsvm, LabelMapping, ParseOptions, SparseDataset};
use crate::error::{Error, Result};
use crate::losses::{LossKind, LossObjective};
use crate::optimizers::{preset, Algorithm, RunTrace, Variant};
use crate::prox::Regularizer;

pub use self::csv::{emit_csv, read_csv, read_rows, write_rows, MetricRow, HEADER};
pub use synthetic::{generate as generate_synthetic, SyntheticSpec};

/// Environment variable that redirects the output file into another
/// directory.
pub const OUTPUT_DIR_ENV: &str = "PROXCG_OUTPUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    /// LIBSVM file; exactly one of `path` and `synthetic` must be set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticSpec>,
    /// Scale file rows to unit l2 norm.
    #[serde(default = "yes")]
    pub normalize: bool,
    #[serde(default)]
    pub labels: LabelMapping,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    /// Name used in the `dataset` column; defaults to the file stem.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

fn yes() -> bool {
    true
}

impl DatasetSpec {
    pub fn load(&self, base: &Path) -> Result<SparseDataset> {
        match (&self.path, &self.synthetic) {
            (Some(p), None) => {
                let p = if p.is_relative() { base.join(p) } else { p.clone() };
                let ds = read_libsvm(&p, &ParseOptions { labels: self.labels, dim: self.dim })?;
                Ok(if self.normalize { normalize_rows_l2(ds) } else { ds })
            }
            (None, Some(s)) => synthetic::generate(s),
            _ => Err(spec_err("dataset", "set exactly one of `path` and `synthetic`")),
        }
    }

    pub fn display_name(&self) -> String {
        if let Some(name) = &self.name {
            return name.clone();
        }
        match &self.path {
            Some(p) => p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "dataset".into()),
            None => "synthetic".into(),
        }
    }
}

/// `λ` as a number or a named rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LambdaSpec {
    Value(f64),
    Rule(String),
}

impl LambdaSpec {
    /// Rules: `w8a` = 1e-2/n, `a9a` = 1e-3/n, `gisette` = 1e-7·√n/√d,
    /// each also accepted with a `paper:` prefix.
    pub fn resolve(&self, n: usize, d: usize) -> Result<f64> {
        let lambda = match self {
            LambdaSpec::Value(x) => *x,
            LambdaSpec::Rule(rule) => match rule.strip_prefix("paper:").unwrap_or(rule) {
                "w8a" => 1e-2 / n as f64,
                "a9a" => 1e-3 / n as f64,
                "gisette" => 1e-7 * (n as f64).sqrt() / (d as f64).sqrt(),
                other => return Err(spec_err("lambda", format!("unknown rule {other:?}"))),
            },
        };
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(spec_err("lambda", format!("{lambda} must be finite and >= 0")));
        }
        Ok(lambda)
    }
}

impl Default for LambdaSpec {
    fn default() -> Self {
        LambdaSpec::Value(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmEntry {
    /// Preset or algorithm name (`v1`, `RS-v3`, `ST-v1`, `prox-sarah`, ...).
    pub algorithm: String,
    /// Column label; defaults to `algorithm`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    /// Switching frequency for `ST-*` entries.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<usize>,
    /// Fixed step for `ST-*` entries.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_f: Option<f64>,
    /// Fields merged over the expanded configuration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub overrides: Option<serde_json::Map<String, serde_json::Value>>,
}

impl AlgorithmEntry {
    pub fn label(&self) -> &str {
        self.label.as_deref().unwrap_or(&self.algorithm)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub dataset: DatasetSpec,
    pub loss: LossKind,
    #[serde(default)]
    pub lambda: LambdaSpec,
    pub algorithms: Vec<AlgorithmEntry>,
    pub seeds: Vec<u64>,
    pub epochs: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_passes: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric_eta: Option<f64>,
    /// Directory that relative paths resolve against; set by
    /// [`load_spec`].
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn spec_err(path: &str, reason: impl Into<String>) -> Error {
    Error::Spec {
        path: path.into(),
        reason: reason.into(),
    }
}

/// Parses and validates a spec document.
pub fn parse_spec(text: &str) -> Result<ExperimentSpec> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let spec: ExperimentSpec = serde_path_to_error::deserialize(de).map_err(|e| Error::Spec {
        path: e.path().to_string(),
        reason: e.inner().to_string(),
    })?;
    if spec.algorithms.is_empty() {
        return Err(spec_err("algorithms", "at least one entry is required"));
    }
    if spec.seeds.is_empty() {
        return Err(spec_err("seeds", "at least one seed is required"));
    }
    if spec.epochs == 0 {
        return Err(spec_err("epochs", "must be at least 1"));
    }
    if let LambdaSpec::Value(x) = spec.lambda {
        if !(x >= 0.0) {
            return Err(spec_err("lambda", format!("{x} must be >= 0")));
        }
    }
    Ok(spec)
}

pub fn load_spec(path: impl AsRef<Path>) -> Result<ExperimentSpec> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut spec = parse_spec(&text)?;
    spec.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(spec)
}

/// Per-example gradient Lipschitz bound `L_loss · max‖a_i‖²`.
pub fn lipschitz_bound(data: &SparseDataset, kind: LossKind) -> f64 {
    let r = data.rows().iter().map(|r| r.norm_sq()).fold(0.0, f64::max);
    kind.lipschitz() * r.max(f64::MIN_POSITIVE)
}

fn merge(base: &mut serde_json::Value, over: &serde_json::Map<String, serde_json::Value>) {
    if let serde_json::Value::Object(obj) = base {
        for (k, v) in over {
            match (obj.get_mut(k), v) {
                (Some(slot @ serde_json::Value::Object(_)), serde_json::Value::Object(inner)) => merge(slot, inner),
                (_, v) => {
                    obj.insert(k.clone(), v.clone());
                }
            }
        }
    }
}

/// Expands one entry into a validated configuration (seed left at 0).
pub fn expand_entry(
    entry: &AlgorithmEntry,
    index: usize,
    spec: &ExperimentSpec,
    n: usize,
    l: f64,
) -> Result<Algorithm> {
    let at = |field: &str| format!("algorithms[{index}].{field}");
    let mut alg = preset(&entry.algorithm, n, l, spec.epochs).map_err(|e| spec_err(&at("algorithm"), e.to_string()))?;
    if let Algorithm::Acc(cfg) = &mut alg {
        if let Variant::Switching { t, eta_f } = &mut cfg.variant {
            if let Some(x) = entry.t {
                *t = x;
            }
            if let Some(x) = entry.eta_f {
                *eta_f = x;
            }
        } else if entry.t.is_some() || entry.eta_f.is_some() {
            return Err(spec_err(&at("t"), "t and eta_f apply only to switching entries"));
        }
    }
    alg.set_max_passes(spec.max_passes);
    if let Some(eta) = spec.metric_eta {
        alg.set_metric_eta(eta);
    }
    if let Some(over) = &entry.overrides {
        let mut value = serde_json::to_value(&alg).map_err(|e| spec_err(&at("overrides"), e.to_string()))?;
        merge(&mut value, over);
        let parsed: std::result::Result<Algorithm, _> = match alg {
            Algorithm::Acc(_) => serde_path_to_error::deserialize(value).map(Algorithm::Acc),
            Algorithm::Baseline(_) => serde_path_to_error::deserialize(value).map(Algorithm::Baseline),
        };
        alg = parsed.map_err(|e: serde_path_to_error::Error<serde_json::Error>| {
            spec_err(&format!("{}.{}", at("overrides"), e.path()), e.inner().to_string())
        })?;
    }
    alg.validate(n).map_err(|e| spec_err(&at("algorithm"), e.to_string()))?;
    Ok(alg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Diverged { epoch: usize },
    Failed { reason: String },
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub label: String,
    pub seed: u64,
    pub status: RunStatus,
    /// Trace or trace-so-far; absent when the run failed before producing
    /// one.
    pub trace: Option<RunTrace>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub algo: String,
    pub runs: usize,
    pub failed: usize,
    pub median_subopt: f64,
    pub median_gmap_sq: f64,
    pub median_passes: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub rows: Vec<MetricRow>,
    pub summary: Vec<SummaryRow>,
    pub runs: Vec<RunOutcome>,
    /// Best objective over every recorded row.
    pub p_star: f64,
    pub lambda: f64,
    pub output: Option<PathBuf>,
}

impl ExperimentResult {
    pub fn all_failed(&self) -> bool {
        self.runs.iter().all(|r| r.status != RunStatus::Completed)
    }
}

/// Loaded problem plus expanded jobs, ready to run.
pub struct Prepared {
    pub data: SparseDataset,
    pub lambda: f64,
    pub jobs: Vec<(String, Algorithm)>,
}

/// Loads data, resolves `λ` and expands every (entry, seed) job.
pub fn prepare(spec: &ExperimentSpec) -> Result<Prepared> {
    let data = spec.dataset.load(&spec.base_dir)?;
    let lambda = spec.lambda.resolve(data.n(), data.d())?;
    let l = lipschitz_bound(&data, spec.loss);
    let mut jobs = Vec::new();
    for (i, entry) in spec.algorithms.iter().enumerate() {
        let alg = expand_entry(entry, i, spec, data.n(), l)?;
        for &seed in &spec.seeds {
            let mut a = alg.clone();
            a.set_seed(seed);
            jobs.push((entry.label().to_string(), a));
        }
    }
    Ok(Prepared { data, lambda, jobs })
}

fn trace_rows(
    trace: &RunTrace,
    label: &str,
    seed: u64,
    dataset: &str,
    loss: &str,
) -> Vec<MetricRow> {
    trace
        .records
        .iter()
        .map(|r| MetricRow {
            run_id: format!("{label}-s{seed}"),
            algo: label.to_string(),
            dataset: dataset.to_string(),
            loss: loss.to_string(),
            seed,
            epoch: r.epoch,
            effective_passes: r.effective_passes,
            objective: r.objective,
            subopt: f64::NAN,
            gmap_sq: r.gmap_sq,
            ls_calls: r.ls_calls,
            fallback_count: r.fallback_count,
            wall_ms: r.wall_ms,
        })
        .collect()
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.retain(|x| !x.is_nan());
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.sort_by(f64::total_cmp);
    let k = xs.len();
    if k % 2 == 1 {
        xs[k / 2]
    } else {
        0.5 * (xs[k / 2 - 1] + xs[k / 2])
    }
}

/// Runs every (algorithm, seed) pair, fills `subopt` against the best
/// objective seen, and writes the CSV when an output path is configured.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    let prepared = prepare(spec)?;
    let reg = Regularizer::l1(prepared.lambda)?;
    let obj = LossObjective::new(&prepared.data, spec.loss);
    let w0 = vec![0.0; prepared.data.d()];

    let runs: Vec<RunOutcome> = prepared
        .jobs
        .par_iter()
        .map(|(label, alg)| {
            let seed = alg.seed();
            let (status, trace) = match alg.run(&obj, &reg, &w0) {
                Ok(tr) => (RunStatus::Completed, Some(tr)),
                Err(Error::Divergence { epoch, trace, .. }) => {
                    log::warn!("{label} seed {seed}: diverged at epoch {epoch}");
                    (RunStatus::Diverged { epoch }, Some(*trace))
                }
                Err(e) => {
                    log::warn!("{label} seed {seed}: {e}");
                    (RunStatus::Failed { reason: e.to_string() }, None)
                }
            };
            RunOutcome { label: label.clone(), seed, status, trace }
        })
        .collect();

    let dataset = spec.dataset.display_name();
    let loss = spec.loss.name();
    let mut rows = Vec::new();
    for run in &runs {
        match &run.trace {
            Some(tr) => rows.extend(trace_rows(tr, &run.label, run.seed, &dataset, loss)),
            None => rows.push(MetricRow {
                run_id: format!("{}-s{}", run.label, run.seed),
                algo: run.label.clone(),
                dataset: dataset.clone(),
                loss: loss.to_string(),
                seed: run.seed,
                epoch: 0,
                effective_passes: 0.0,
                objective: f64::NAN,
                subopt: f64::NAN,
                gmap_sq: f64::NAN,
                ls_calls: 0,
                fallback_count: 0,
                wall_ms: 0.0,
            }),
        }
    }
    let p_star = rows
        .iter()
        .map(|r| r.objective)
        .filter(|x| x.is_finite())
        .fold(f64::INFINITY, f64::min);
    for r in &mut rows {
        if r.objective.is_finite() {
            r.subopt = r.objective - p_star;
        }
    }

    let summary = summarize(&rows, &runs);
    let output = spec.output.as_ref().map(|p| resolve_output(p, &spec.base_dir));
    if let Some(path) = &output {
        emit_csv(&rows, path)?;
    }
    Ok(ExperimentResult {
        rows,
        summary,
        runs,
        p_star,
        lambda: prepared.lambda,
        output,
    })
}

/// Honors [`OUTPUT_DIR_ENV`], otherwise resolves relative to the spec.
pub fn resolve_output(path: &Path, base: &Path) -> PathBuf {
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(dir) if !dir.is_empty() => {
            PathBuf::from(dir).join(path.file_name().unwrap_or(path.as_os_str()))
        }
        _ if path.is_relative() => base.join(path),
        _ => path.to_path_buf(),
    }
}

/// Final-epoch medians per label, best median sub-optimality first.
pub fn summarize(rows: &[MetricRow], runs: &[RunOutcome]) -> Vec<SummaryRow> {
    let mut labels: Vec<&str> = Vec::new();
    for r in runs {
        if !labels.contains(&r.label.as_str()) {
            labels.push(&r.label);
        }
    }
    let mut out: Vec<SummaryRow> = labels
        .into_iter()
        .map(|label| {
            let mine: Vec<&RunOutcome> = runs.iter().filter(|r| r.label == label).collect();
            let finals: Vec<&MetricRow> = mine
                .iter()
                .filter_map(|run| {
                    let id = format!("{}-s{}", run.label, run.seed);
                    rows.iter().rev().find(|r| r.run_id == id)
                })
                .collect();
            SummaryRow {
                algo: label.to_string(),
                runs: mine.len(),
                failed: mine.iter().filter(|r| r.status != RunStatus::Completed).count(),
                median_subopt: median(finals.iter().map(|r| r.subopt).collect()),
                median_gmap_sq: median(finals.iter().map(|r| r.gmap_sq).collect()),
                median_passes: median(finals.iter().map(|r| r.effective_passes).collect()),
            }
        })
        .collect();
    out.sort_by(|a, b| match (a.median_subopt.is_nan(), b.median_subopt.is_nan()) {
        (false, false) => a.median_subopt.total_cmp(&b.median_subopt),
        (x, y) => x.cmp(&y),
    });
    out
}

/// Plain-text table of the summary.
pub fn format_summary(summary: &[SummaryRow]) -> String {
    let mut s = format!(
        "{:<24} {:>5} {:>7} {:>14} {:>14} {:>10}\n",
        "algo", "runs", "failed", "subopt", "gmap_sq", "passes"
    );
    for r in summary {
        s.push_str(&format!(
            "{:<24} {:>5} {:>7} {:>14.6e} {:>14.6e} {:>10.3}\n",
            r.algo, r.runs, r.failed, r.median_subopt, r.median_gmap_sq, r.median_passes
        ));
    }
    s
}
