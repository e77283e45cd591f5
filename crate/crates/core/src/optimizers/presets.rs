//! Named experiment configurations.

use crate::directions::BetaFormula;
use crate::error::{Error, Result};
use crate::linesearch::WolfeParams;

use super::{default_metric_eta, AccConfig, Algorithm, BaselineConfig, BaselineKind, OutputMode, Variant};

/// `⌊√n⌋` in exact integer arithmetic.
pub fn floor_sqrt(n: usize) -> usize {
    let mut r = (n as f64).sqrt() as usize;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

/// `⌊n^{1/3}⌋` in exact integer arithmetic.
pub fn floor_cbrt(n: usize) -> usize {
    let mut r = (n as f64).cbrt() as usize;
    let cube = |x: usize| (x as u128).pow(3);
    while r > 0 && cube(r) > n as u128 {
        r -= 1;
    }
    while cube(r + 1) <= n as u128 {
        r += 1;
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchRule {
    /// `⌊n^{1/3}⌋`
    Cbrt,
    /// `⌊√n⌋`
    Sqrt,
    /// `⌊2√n⌋`
    TwoSqrt,
}

impl BatchRule {
    pub fn eval(self, n: usize) -> usize {
        match self {
            BatchRule::Cbrt => floor_cbrt(n),
            BatchRule::Sqrt => floor_sqrt(n),
            BatchRule::TwoSqrt => floor_sqrt(4 * n),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PresetRow {
    pub name: &'static str,
    pub batch: BatchRule,
    pub frpr: bool,
    /// γ = √m / gamma_div before clamping.
    pub gamma_div: f64,
}

pub const PRESET_ROWS: [PresetRow; 8] = [
    PresetRow { name: "v1", batch: BatchRule::Cbrt, frpr: false, gamma_div: 4.0 },
    PresetRow { name: "v2", batch: BatchRule::Cbrt, frpr: true, gamma_div: 4.0 },
    PresetRow { name: "v3", batch: BatchRule::Sqrt, frpr: false, gamma_div: 4.0 },
    PresetRow { name: "v4", batch: BatchRule::Sqrt, frpr: false, gamma_div: 5.0 },
    PresetRow { name: "v5", batch: BatchRule::Sqrt, frpr: true, gamma_div: 4.0 },
    PresetRow { name: "v6", batch: BatchRule::Sqrt, frpr: true, gamma_div: 5.0 },
    PresetRow { name: "v7", batch: BatchRule::TwoSqrt, frpr: false, gamma_div: 4.0 },
    PresetRow { name: "v8", batch: BatchRule::TwoSqrt, frpr: true, gamma_div: 4.0 },
];

pub(crate) const DEFAULT_RHO: f64 = 0.8;
pub(crate) const DEFAULT_BETA_O: f64 = 0.9;
/// Step cap used by the named presets. Large on purpose: the searched
/// step does the work and the cap only trims outliers.
pub const PRESET_ETA2: f64 = 100.0;

/// Configuration for one table row: `m = ⌊n^{1/3}/3⌋` (at least 1),
/// `b` from the row rule, `γ = min(√m/div, 1)`.
pub fn table2_config(row: &PresetRow, n: usize, variant: Variant, epochs: usize) -> AccConfig {
    let m = (floor_cbrt(n) / 3).max(1);
    let b = row.batch.eval(n).clamp(1, n.max(1));
    let raw_gamma = (m as f64).sqrt() / row.gamma_div;
    if raw_gamma > 1.0 {
        log::warn!(
            "preset {}: momentum weight {raw_gamma:.4} exceeds 1, clamped to 1",
            row.name
        );
    }
    let beta = if row.frpr {
        BetaFormula::frpr()
    } else {
        BetaFormula::afr(DEFAULT_RHO, DEFAULT_BETA_O)
    };
    AccConfig {
        variant,
        epochs,
        m,
        b,
        gamma: raw_gamma.min(1.0),
        beta,
        wolfe: WolfeParams { eta2: PRESET_ETA2, ..WolfeParams::default() },
        seed: 0,
        metric_eta: default_metric_eta(),
        output: OutputMode::Last,
        max_passes: None,
        track_deviation: false,
    }
}

fn row_by_name(name: &str) -> Option<&'static PresetRow> {
    PRESET_ROWS.iter().find(|r| r.name.eq_ignore_ascii_case(name))
}

/// Expands a preset or algorithm name for a problem with `n` examples and
/// per-example Lipschitz constant `l`.
///
/// Accepted: `v1`..`v8`, `RS-v1`..`RS-v8`, `ST-v1`..`ST-v8` (switching
/// parameters must be set afterwards), the three algorithm names (which use
/// the `v1` row) and the baseline names.
pub fn preset(name: &str, n: usize, l: f64, epochs: usize) -> Result<Algorithm> {
    let lower = name.to_ascii_lowercase();
    let placeholder_st = Variant::Switching { t: 0, eta_f: 0.0 };
    let (variant, row) = if let Some(rest) = lower.strip_prefix("rs-") {
        (Variant::Restart, row_by_name(rest))
    } else if let Some(rest) = lower.strip_prefix("st-") {
        (placeholder_st, row_by_name(rest))
    } else {
        match lower.as_str() {
            "acc-prox-cg-sarah" => (Variant::Standard, row_by_name("v1")),
            "acc-prox-cg-sarah-rs" => (Variant::Restart, row_by_name("v1")),
            "acc-prox-cg-sarah-st" => (placeholder_st, row_by_name("v1")),
            "prox-sarah" => return Ok(Algorithm::Baseline(BaselineConfig::for_kind(BaselineKind::ProxSarah, n, l, epochs))),
            "prox-spiderboost" => {
                return Ok(Algorithm::Baseline(BaselineConfig::for_kind(BaselineKind::ProxSpiderboost, n, l, epochs)))
            }
            "prox-svrg+" | "prox-svrg-plus" => {
                return Ok(Algorithm::Baseline(BaselineConfig::for_kind(BaselineKind::ProxSvrgPlus, n, l, epochs)))
            }
            _ => (Variant::Standard, row_by_name(&lower)),
        }
    };
    let row = row.ok_or_else(|| Error::invalid(format!("unknown algorithm or preset {name:?}")))?;
    Ok(Algorithm::Acc(table2_config(row, n, variant, epochs)))
}
