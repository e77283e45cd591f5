//! SARAH recursive gradient estimator, conjugate parameters and the
//! search-direction recursion.

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{dist_sq, dot, norm_sq};
use crate::objective::FiniteSum;

/// Squared reference norms below this are treated as a restart (β = 0).
pub const DEGENERATE_DENOMINATOR: f64 = 1e-24;

/// Rule for the conjugate parameter β.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BetaFormula {
    /// Plain Fletcher-Reeves ratio.
    Fr,
    /// `min{β_o, ρ·β_FR}`.
    Afr { rho: f64, beta_o: f64 },
    /// Polak-Ribière clamped into `[-β_FR, β_FR]`; optionally reset to 0
    /// when `|β|` exceeds `beta_max`.
    Frpr {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        beta_max: Option<f64>,
    },
}

impl BetaFormula {
    pub fn afr(rho: f64, beta_o: f64) -> Self {
        BetaFormula::Afr { rho, beta_o }
    }

    pub fn frpr() -> Self {
        BetaFormula::Frpr { beta_max: None }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            BetaFormula::Fr => Ok(()),
            BetaFormula::Afr { rho, beta_o } => {
                if rho > 0.0 && beta_o > 0.0 {
                    Ok(())
                } else {
                    Err(Error::invalid(format!(
                        "AFR needs rho > 0 and beta_o > 0 (got {rho}, {beta_o})"
                    )))
                }
            }
            BetaFormula::Frpr { beta_max } => match beta_max {
                Some(cap) if !(cap > 0.0) => {
                    Err(Error::invalid(format!("FRPR cap {cap} must be positive")))
                }
                _ => Ok(()),
            },
        }
    }

    /// β against the reference estimator `v_ref` (lag 1 or lag t).
    pub fn try_evaluate(&self, v_cur: &[f64], v_ref: &[f64]) -> Result<f64> {
        match *self {
            BetaFormula::Fr => beta_fr(v_cur, v_ref),
            BetaFormula::Afr { rho, beta_o } => beta_afr(v_cur, v_ref, rho, beta_o),
            BetaFormula::Frpr { beta_max } => {
                let beta = beta_frpr(v_cur, v_ref)?;
                Ok(match beta_max {
                    Some(cap) if beta.abs() > cap => 0.0,
                    _ => beta,
                })
            }
        }
    }

    /// Like [`try_evaluate`](Self::try_evaluate) with a degenerate
    /// denominator mapped to a restart.
    pub fn evaluate(&self, v_cur: &[f64], v_ref: &[f64]) -> f64 {
        self.try_evaluate(v_cur, v_ref).unwrap_or(0.0)
    }

    pub fn name(&self) -> &'static str {
        match self {
            BetaFormula::Fr => "FR",
            BetaFormula::Afr { .. } => "AFR",
            BetaFormula::Frpr { .. } => "FRPR",
        }
    }
}

fn ref_norm_sq(v_cur: &[f64], v_ref: &[f64]) -> Result<f64> {
    check_dim(v_ref.len(), v_cur.len())?;
    let den = norm_sq(v_ref);
    if den < DEGENERATE_DENOMINATOR {
        return Err(Error::DegenerateDenominator(den));
    }
    Ok(den)
}

/// `‖v_cur‖² / ‖v_ref‖²`.
pub fn beta_fr(v_cur: &[f64], v_ref: &[f64]) -> Result<f64> {
    let den = ref_norm_sq(v_cur, v_ref)?;
    Ok(norm_sq(v_cur) / den)
}

pub fn afr_from_fr(beta_fr: f64, rho: f64, beta_o: f64) -> f64 {
    beta_o.min(rho * beta_fr)
}

pub fn beta_afr(v_cur: &[f64], v_ref: &[f64], rho: f64, beta_o: f64) -> Result<f64> {
    Ok(afr_from_fr(beta_fr(v_cur, v_ref)?, rho, beta_o))
}

/// Clamps a PR value into `[-β_FR, β_FR]`.
pub fn frpr_from_parts(beta_pr: f64, beta_fr: f64) -> f64 {
    if beta_pr < -beta_fr {
        -beta_fr
    } else if beta_pr > beta_fr {
        beta_fr
    } else {
        beta_pr
    }
}

pub fn beta_frpr(v_cur: &[f64], v_ref: &[f64]) -> Result<f64> {
    let den = ref_norm_sq(v_cur, v_ref)?;
    let cur = norm_sq(v_cur);
    let pr = (cur - dot(v_cur, v_ref)) / den;
    Ok(frpr_from_parts(pr, cur / den))
}

/// β against the estimator `t` steps back; identical formulas, lagged
/// reference.
pub fn beta_lagged(formula: &BetaFormula, v_cur: &[f64], v_lag: &[f64]) -> Result<f64> {
    formula.try_evaluate(v_cur, v_lag)
}

/// `v_k = ∇f_B(w_k) - ∇f_B(w_{k-1}) + v_{k-1}`.
pub fn sarah_update(v_prev: &[f64], grad_cur: &[f64], grad_prev: &[f64]) -> Result<Vec<f64>> {
    check_dim(v_prev.len(), grad_cur.len())?;
    check_dim(v_prev.len(), grad_prev.len())?;
    let mut v = v_prev.to_vec();
    sarah_in_place(&mut v, grad_cur, grad_prev);
    Ok(v)
}

#[inline]
pub(crate) fn sarah_in_place(v: &mut [f64], grad_cur: &[f64], grad_prev: &[f64]) {
    for ((vi, gc), gp) in v.iter_mut().zip(grad_cur).zip(grad_prev) {
        *vi += gc - gp;
    }
}

/// `d_k = -v_k + β·d_ref`.
pub fn direction_update(v: &[f64], beta: f64, d_ref: &[f64]) -> Result<Vec<f64>> {
    check_dim(v.len(), d_ref.len())?;
    let mut d = vec![0.0; v.len()];
    direction_into(v, beta, d_ref, &mut d);
    Ok(d)
}

#[inline]
pub(crate) fn direction_into(v: &[f64], beta: f64, d_ref: &[f64], out: &mut [f64]) {
    if beta == 0.0 {
        for (o, vi) in out.iter_mut().zip(v) {
            *o = -vi;
        }
    } else {
        for ((o, vi), di) in out.iter_mut().zip(v).zip(d_ref) {
            *o = -vi + beta * di;
        }
    }
}

/// Estimator recursion state within one epoch.
#[derive(Debug, Clone)]
pub struct EstimatorState {
    /// Current estimator `v_k`.
    pub v_cur: Vec<f64>,
    /// Reference estimator for β (`v_{k-1}` for lag 1).
    pub v_ref: Vec<f64>,
    /// Direction at the reference point.
    pub d_prev: Vec<f64>,
    pub k: usize,
}

impl EstimatorState {
    /// Epoch start: `v_0 = ∇f(w_0)` and the initial direction `d_0`.
    pub fn start(full_grad: Vec<f64>, d0: Vec<f64>) -> Self {
        EstimatorState {
            v_ref: full_grad.clone(),
            v_cur: full_grad,
            d_prev: d0,
            k: 0,
        }
    }

    /// One SARAH step; the previous estimator becomes the lag-1 reference.
    pub fn advance(&mut self, grad_cur: &[f64], grad_prev: &[f64]) {
        self.v_ref.copy_from_slice(&self.v_cur);
        sarah_in_place(&mut self.v_cur, grad_cur, grad_prev);
        self.k += 1;
    }

    /// `d_k = -v_k + β d_{k-1}` with β from `formula`; stores and returns
    /// `(β, d_k)`.
    pub fn conjugate_direction(&mut self, formula: &BetaFormula) -> (f64, &[f64]) {
        let beta = formula.evaluate(&self.v_cur, &self.v_ref);
        let mut d = std::mem::take(&mut self.d_prev);
        // -v + β d computed in place over the old direction
        for (di, vi) in d.iter_mut().zip(&self.v_cur) {
            *di = -vi + beta * *di;
        }
        self.d_prev = d;
        (beta, &self.d_prev)
    }
}

/// Exact check of the mini-batch SARAH variance identity by enumerating
/// every size-`b` batch. Returns `(lhs, rhs)` where `lhs = E‖v_k - v_prev‖²`
/// and `rhs` is the closed form in full and per-example gradient
/// differences.
pub fn lemma1_variance_check<O: FiniteSum + ?Sized>(
    obj: &O,
    w_k: &[f64],
    w_prev: &[f64],
    v_prev: &[f64],
    b: usize,
) -> Result<(f64, f64)> {
    let n = obj.num_examples();
    let d = obj.dim();
    if n > 12 {
        return Err(Error::invalid(format!("n = {n} too large to enumerate batches (max 12)")));
    }
    if n < 2 || b == 0 || b > n {
        return Err(Error::invalid(format!("need 2 <= n and 1 <= b <= n (n = {n}, b = {b})")));
    }
    check_dim(d, w_k.len())?;
    check_dim(d, w_prev.len())?;
    check_dim(d, v_prev.len())?;

    let mut g_cur = vec![0.0; d];
    let mut g_prev = vec![0.0; d];

    let mut lhs = 0.0;
    let mut count = 0usize;
    for batch in (0..n).combinations(b) {
        obj.batch_value_grad(w_k, &batch, &mut g_cur);
        obj.batch_value_grad(w_prev, &batch, &mut g_prev);
        let mut v = v_prev.to_vec();
        sarah_in_place(&mut v, &g_cur, &g_prev);
        lhs += dist_sq(&v, v_prev);
        count += 1;
    }
    lhs /= count as f64;

    obj.full_value_grad(w_k, &mut g_cur);
    obj.full_value_grad(w_prev, &mut g_prev);
    let full_term = dist_sq(&g_cur, &g_prev);
    let mut per_example = 0.0;
    for i in 0..n {
        obj.batch_value_grad(w_k, &[i], &mut g_cur);
        obj.batch_value_grad(w_prev, &[i], &mut g_prev);
        per_example += dist_sq(&g_cur, &g_prev);
    }
    per_example /= n as f64;

    let (nf, bf) = (n as f64, b as f64);
    let rhs = nf * (bf - 1.0) / (bf * (nf - 1.0)) * full_term
        + (nf - bf) / (bf * (nf - 1.0)) * per_example;
    Ok((lhs, rhs))
}
