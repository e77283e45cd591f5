//! The accelerated proximal conjugate-gradient SARAH family and the
//! baseline methods, all reporting through [`RunTrace`].

mod acc;
mod baselines;
mod presets;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::directions::BetaFormula;
use crate::error::{Error, Result};
use crate::linesearch::WolfeParams;
use crate::objective::FiniteSum;
use crate::prox::{gradient_mapping_norm_sq, Regularizer};

pub use acc::{
    run_acc, run_acc_observed, run_acc_prox_cg_sarah, run_acc_prox_cg_sarah_rs, run_acc_prox_cg_sarah_st,
    StepEvent,
};
pub use baselines::{run_baseline, run_prox_sarah, run_prox_spiderboost, run_prox_svrg_plus};
pub use presets::{floor_cbrt, floor_sqrt, preset, table2_config, PresetRow, PRESET_ETA2, PRESET_ROWS};

/// Which member of the family to run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Variant {
    /// Direction carried across epochs through `h`.
    Standard,
    /// Every epoch restarts from the negative full gradient.
    Restart,
    /// Conjugate steps and curvature searches only every `t` inner steps,
    /// fixed step `eta_f` elsewhere.
    Switching { t: usize, eta_f: f64 },
}

impl Variant {
    pub fn algorithm_name(&self) -> &'static str {
        match self {
            Variant::Standard => "acc-prox-cg-sarah",
            Variant::Restart => "acc-prox-cg-sarah-rs",
            Variant::Switching { .. } => "acc-prox-cg-sarah-st",
        }
    }
}

/// How the epoch output `w̃_s` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputMode {
    /// The final momentum iterate `w_m`.
    #[default]
    Last,
    /// A uniformly drawn `w_k`, `k ∈ 1..=m`.
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccConfig {
    pub variant: Variant,
    /// Outer epochs `S`.
    pub epochs: usize,
    /// Epoch length.
    pub m: usize,
    /// Mini-batch size.
    pub b: usize,
    /// Momentum weight in `(0, 1]`.
    pub gamma: f64,
    pub beta: BetaFormula,
    #[serde(default)]
    pub wolfe: WolfeParams,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_metric_eta")]
    pub metric_eta: f64,
    #[serde(default)]
    pub output: OutputMode,
    /// Stop after the first epoch that reaches this many effective passes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_passes: Option<f64>,
    /// Record `‖v_{m-1} - ∇f(w_{m-1})‖²` each epoch (one uncounted full
    /// gradient per epoch).
    #[serde(default)]
    pub track_deviation: bool,
}

pub(crate) fn default_metric_eta() -> f64 {
    0.5
}

impl AccConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be at least 1"));
        }
        if self.m == 0 {
            return Err(Error::invalid("epoch length m must be at least 1"));
        }
        if self.b == 0 || self.b > n {
            return Err(Error::invalid(format!("batch size {} must lie in [1, n = {n}]", self.b)));
        }
        check_gamma(self.gamma)?;
        check_positive("metric_eta", self.metric_eta)?;
        self.beta.validate()?;
        self.wolfe.validate()?;
        if let Variant::Switching { t, eta_f } = self.variant {
            if !(t > 1 && t < self.m) {
                return Err(Error::invalid(format!(
                    "switching frequency t = {t} must satisfy 1 < t <= m - 1 = {}",
                    self.m as i64 - 1
                )));
            }
            check_positive("eta_f", eta_f)?;
        }
        Ok(())
    }
}

pub(crate) fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("momentum weight {gamma} must lie in (0, 1]")))
    }
}

pub(crate) fn check_positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} = {x} must be positive and finite")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineKind {
    ProxSarah,
    ProxSpiderboost,
    #[serde(rename = "prox-svrg+")]
    ProxSvrgPlus,
}

impl BaselineKind {
    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::ProxSarah => "prox-sarah",
            BaselineKind::ProxSpiderboost => "prox-spiderboost",
            BaselineKind::ProxSvrgPlus => "prox-svrg+",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineConfig {
    pub kind: BaselineKind,
    pub epochs: usize,
    pub m: usize,
    pub b: usize,
    /// Snapshot batch size for the SVRG estimator; ignored otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_batch: Option<usize>,
    pub eta: f64,
    pub gamma: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_metric_eta")]
    pub metric_eta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_passes: Option<f64>,
}

impl BaselineConfig {
    /// ProxSARAH: `γ = 0.99`, `C = 2/(3L²γ²)`, `b = ⌊n^{1/3}/C⌋`,
    /// `m = ⌊n^{1/3}⌋`, `η = 2/(4 + Lγ)`.
    pub fn prox_sarah(n: usize, l: f64, epochs: usize) -> Self {
        let gamma = 0.99;
        let c = 2.0 / (3.0 * l * l * gamma * gamma);
        let b = (((n as f64).cbrt() / c).floor() as usize).clamp(1, n);
        BaselineConfig {
            kind: BaselineKind::ProxSarah,
            epochs,
            m: floor_cbrt(n).max(1),
            b,
            snapshot_batch: None,
            eta: 2.0 / (4.0 + l * gamma),
            gamma,
            seed: 0,
            metric_eta: default_metric_eta(),
            max_passes: None,
        }
    }

    /// Prox-SpiderBoost: `b = m = ⌊√n⌋`, `η = 1/(2L)`, no momentum.
    pub fn prox_spiderboost(n: usize, l: f64, epochs: usize) -> Self {
        let s = floor_sqrt(n).max(1);
        BaselineConfig {
            kind: BaselineKind::ProxSpiderboost,
            epochs,
            m: s,
            b: s,
            snapshot_batch: None,
            eta: 1.0 / (2.0 * l),
            gamma: 1.0,
            seed: 0,
            metric_eta: default_metric_eta(),
            max_passes: None,
        }
    }

    /// ProxSVRG+: `B = ⌊n/5⌋`, `b = ⌊n^{2/3}⌋`, `m = ⌊√b⌋`, `η = 1/(6L)`.
    pub fn prox_svrg_plus(n: usize, l: f64, epochs: usize) -> Self {
        let b = floor_cbrt(n.saturating_mul(n)).clamp(1, n);
        BaselineConfig {
            kind: BaselineKind::ProxSvrgPlus,
            epochs,
            m: floor_sqrt(b).max(1),
            b,
            snapshot_batch: Some((n / 5).max(1)),
            eta: 1.0 / (6.0 * l),
            gamma: 1.0,
            seed: 0,
            metric_eta: default_metric_eta(),
            max_passes: None,
        }
    }

    pub fn for_kind(kind: BaselineKind, n: usize, l: f64, epochs: usize) -> Self {
        match kind {
            BaselineKind::ProxSarah => Self::prox_sarah(n, l, epochs),
            BaselineKind::ProxSpiderboost => Self::prox_spiderboost(n, l, epochs),
            BaselineKind::ProxSvrgPlus => Self::prox_svrg_plus(n, l, epochs),
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.epochs == 0 || self.m == 0 {
            return Err(Error::invalid("epochs and m must be at least 1"));
        }
        if self.b == 0 || self.b > n {
            return Err(Error::invalid(format!("batch size {} must lie in [1, n = {n}]", self.b)));
        }
        if let Some(bb) = self.snapshot_batch {
            if bb == 0 || bb > n {
                return Err(Error::invalid(format!("snapshot batch {bb} must lie in [1, n = {n}]")));
            }
        }
        check_positive("eta", self.eta)?;
        check_positive("metric_eta", self.metric_eta)?;
        check_gamma(self.gamma)
    }
}

/// Any runnable method with its configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Algorithm {
    Acc(AccConfig),
    Baseline(BaselineConfig),
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Acc(c) => c.variant.algorithm_name(),
            Algorithm::Baseline(c) => c.kind.name(),
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            Algorithm::Acc(c) => c.seed,
            Algorithm::Baseline(c) => c.seed,
        }
    }

    pub fn set_seed(&mut self, seed: u64) {
        match self {
            Algorithm::Acc(c) => c.seed = seed,
            Algorithm::Baseline(c) => c.seed = seed,
        }
    }

    pub fn set_epochs(&mut self, epochs: usize) {
        match self {
            Algorithm::Acc(c) => c.epochs = epochs,
            Algorithm::Baseline(c) => c.epochs = epochs,
        }
    }

    pub fn set_max_passes(&mut self, max_passes: Option<f64>) {
        match self {
            Algorithm::Acc(c) => c.max_passes = max_passes,
            Algorithm::Baseline(c) => c.max_passes = max_passes,
        }
    }

    pub fn set_metric_eta(&mut self, eta: f64) {
        match self {
            Algorithm::Acc(c) => c.metric_eta = eta,
            Algorithm::Baseline(c) => c.metric_eta = eta,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            Algorithm::Acc(c) => c.validate(n),
            Algorithm::Baseline(c) => c.validate(n),
        }
    }

    pub fn run<O: FiniteSum + ?Sized>(&self, obj: &O, reg: &Regularizer, w0: &[f64]) -> Result<RunTrace> {
        match self {
            Algorithm::Acc(c) => run_acc(c, obj, reg, w0),
            Algorithm::Baseline(c) => run_baseline(c, obj, reg, w0),
        }
    }
}

/// Metrics at the end of one epoch (epoch 0 is the starting point).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Cumulative individual-gradient evaluations divided by `n`.
    pub effective_passes: f64,
    /// `P(w̃_s) = f(w̃_s) + φ(w̃_s)`.
    pub objective: f64,
    /// `‖𝒢_η(w̃_s)‖²` at the metric step.
    pub gmap_sq: f64,
    /// Cumulative line-search invocations.
    pub ls_calls: usize,
    /// Cumulative searches that ended on the fallback step.
    pub fallback_count: usize,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub algorithm: String,
    pub config: serde_json::Value,
    pub records: Vec<EpochRecord>,
    /// Largest observed `‖v_k‖² / ‖v_{k-1}‖²`.
    pub beta_hat_max: f64,
    /// Smallest step actually taken after a search.
    pub eta_min: Option<f64>,
    /// Times the ascent guard replaced a direction with `-v`.
    pub direction_resets: usize,
    /// Largest `‖v_{m-1} - ∇f(w_{m-1})‖²` when tracked.
    pub deviation_sq_max: Option<f64>,
    /// Final epoch output.
    pub w_final: Vec<f64>,
}

impl RunTrace {
    pub fn final_record(&self) -> &EpochRecord {
        self.records.last().expect("trace always holds the epoch-0 record")
    }
}

/// Cost accounting, diagnostics and per-epoch metrics shared by all
/// methods.
pub(crate) struct Tracker<'a, O: FiniteSum + ?Sized> {
    obj: &'a O,
    reg: &'a Regularizer,
    metric_eta: f64,
    max_passes: Option<f64>,
    n: usize,
    evals: u64,
    pub ls_calls: usize,
    pub fallbacks: usize,
    start: Instant,
    p0: f64,
    pub trace: RunTrace,
}

impl<'a, O: FiniteSum + ?Sized> Tracker<'a, O> {
    pub fn new(
        obj: &'a O,
        reg: &'a Regularizer,
        algorithm: &str,
        config: serde_json::Value,
        metric_eta: f64,
        max_passes: Option<f64>,
    ) -> Self {
        Tracker {
            obj,
            reg,
            metric_eta,
            max_passes,
            n: obj.num_examples(),
            evals: 0,
            ls_calls: 0,
            fallbacks: 0,
            start: Instant::now(),
            p0: f64::NAN,
            trace: RunTrace {
                algorithm: algorithm.to_string(),
                config,
                records: Vec::new(),
                beta_hat_max: 0.0,
                eta_min: None,
                direction_resets: 0,
                deviation_sq_max: None,
                w_final: Vec::new(),
            },
        }
    }

    /// Charge `count` individual gradient evaluations.
    #[inline]
    pub fn charge(&mut self, count: usize) {
        self.evals += count as u64;
    }

    pub fn passes(&self) -> f64 {
        self.evals as f64 / self.n as f64
    }

    pub fn note_step(&mut self, eta: f64) {
        self.trace.eta_min = Some(self.trace.eta_min.map_or(eta, |e| e.min(eta)));
    }

    pub fn note_ratio(&mut self, v_sq: f64, v_prev_sq: f64) {
        if v_prev_sq > 0.0 {
            let r = v_sq / v_prev_sq;
            if r > self.trace.beta_hat_max {
                self.trace.beta_hat_max = r;
            }
        }
    }

    pub fn note_deviation(&mut self, dev_sq: f64) {
        let cur = self.trace.deviation_sq_max.unwrap_or(0.0);
        self.trace.deviation_sq_max = Some(cur.max(dev_sq));
    }

    /// Computes `P`, `∇f` and `‖𝒢‖²` at `w`, appends the epoch record and
    /// returns the full gradient for reuse. Errors with the trace so far
    /// when the objective is non-finite or has blown up.
    pub fn record(&mut self, epoch: usize, w: &[f64]) -> Result<Vec<f64>> {
        let mut grad = vec![0.0; w.len()];
        let f = self.obj.full_value_grad(w, &mut grad);
        let objective = f + self.reg.value(w);
        let gmap_sq = gradient_mapping_norm_sq(w, self.metric_eta, &grad, self.reg);
        if epoch == 0 {
            self.p0 = objective;
        }
        self.trace.records.push(EpochRecord {
            epoch,
            effective_passes: self.passes(),
            objective,
            gmap_sq,
            ls_calls: self.ls_calls,
            fallback_count: self.fallbacks,
            wall_ms: self.start.elapsed().as_secs_f64() * 1e3,
        });
        let blown_up = self.p0.abs() > 0.0 && objective.abs() > 1e8 * self.p0.abs();
        if !objective.is_finite() || !gmap_sq.is_finite() || blown_up {
            self.trace.w_final = w.to_vec();
            return Err(Error::Divergence {
                epoch,
                objective,
                trace: Box::new(self.trace.clone()),
            });
        }
        Ok(grad)
    }

    pub fn budget_exhausted(&self) -> bool {
        self.max_passes.is_some_and(|p| self.passes() >= p)
    }

    pub fn finish(mut self, w: Vec<f64>) -> RunTrace {
        self.trace.w_final = w;
        self.trace
    }
}
