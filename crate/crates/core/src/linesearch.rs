//! Step-size selection under batch-evaluated strong Wolfe conditions.
//!
//! The searches work on two scalar functions of the trial step `η`:
//! `φ(η) = f_B(w + ηd)` and `ψ(η) = ⟨v_next(η), d_ref⟩`, where
//! `v_next(η) = ∇f_B(w + ηd) - ∇f_B(w) + v` is the estimator that would be
//! formed from the *current* batch at the trial point. Callers supply a
//! closure returning both; [`BatchLine`] builds one from a [`FiniteSum`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::objective::FiniteSum;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WolfeParams {
    pub c1: f64,
    pub c2: f64,
    /// Cap applied to the accepted step.
    pub eta2: f64,
    /// First trial step; `None` starts at `eta2`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta_init: Option<f64>,
    pub max_bracket: usize,
    pub max_zoom: usize,
}

impl Default for WolfeParams {
    fn default() -> Self {
        WolfeParams {
            c1: 1e-4,
            c2: 0.1,
            eta2: 0.5,
            eta_init: None,
            max_bracket: 20,
            max_zoom: 30,
        }
    }
}

impl WolfeParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.c1 && self.c1 < self.c2 && self.c2 < 1.0) {
            return Err(Error::invalid(format!(
                "need 0 < c1 < c2 < 1 (c1 = {}, c2 = {})",
                self.c1, self.c2
            )));
        }
        if !(self.eta2 > 0.0 && self.eta2.is_finite()) {
            return Err(Error::invalid(format!("eta2 = {} must be positive", self.eta2)));
        }
        if let Some(e) = self.eta_init {
            if !(e > 0.0 && e.is_finite()) {
                return Err(Error::invalid(format!("eta_init = {e} must be positive")));
            }
        }
        if self.max_bracket == 0 {
            return Err(Error::invalid("max_bracket must be at least 1"));
        }
        Ok(())
    }

    pub fn initial_step(&self) -> f64 {
        self.eta_init.unwrap_or(self.eta2)
    }
}

/// Values observed at one trial step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trial {
    /// `φ(η)`; unused by the curvature-only search.
    pub phi: f64,
    /// `ψ(η)`.
    pub psi: f64,
}

impl Trial {
    fn finite(&self) -> bool {
        self.phi.is_finite() && self.psi.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    /// Step actually taken, `min(eta_tilde, eta2)` or `eta2` on fallback.
    pub eta: f64,
    /// Step the conditions were checked at (pre-cap).
    pub eta_tilde: f64,
    pub satisfied_armijo: bool,
    pub satisfied_curvature: bool,
    /// Number of trial evaluations, each one batch gradient.
    pub trials: usize,
    pub fallback_used: bool,
    /// The search stopped once every remaining candidate lay beyond the
    /// cap, so the step is `eta2` without a checked `eta_tilde`.
    #[serde(default)]
    pub capped_early: bool,
}

/// Sufficient decrease `φ(η) ≤ φ(0) + c1·η·φ'(0)`.
pub fn armijo_holds(phi_eta: f64, phi0: f64, slope0: f64, eta: f64, c1: f64) -> bool {
    phi_eta <= phi0 + c1 * eta * slope0
}

/// Strong curvature `|ψ(η)| ≤ -c2·ref`.
pub fn curvature_holds(psi_eta: f64, curv_ref: f64, c2: f64) -> bool {
    psi_eta.abs() <= -c2 * curv_ref
}

struct Memo {
    trials: Vec<(f64, Trial, bool, bool)>,
}

impl Memo {
    fn fallback(&self, params: &WolfeParams) -> Result<SearchOutcome> {
        self.at_cap(params, true)
    }

    fn capped(&self, params: &WolfeParams) -> Result<SearchOutcome> {
        self.at_cap(params, false)
    }

    /// `eta2` with the flags recorded at exactly `eta2`, if it was tried.
    fn at_cap(&self, params: &WolfeParams, budget_spent: bool) -> Result<SearchOutcome> {
        if self.trials.iter().all(|(_, t, _, _)| !t.finite()) {
            return Err(Error::SearchFailure(format!(
                "all {} trial steps gave non-finite values",
                self.trials.len()
            )));
        }
        let (arm, curv) = self
            .trials
            .iter()
            .find(|(eta, ..)| *eta == params.eta2)
            .map(|&(_, _, a, c)| (a, c))
            .unwrap_or((false, false));
        Ok(SearchOutcome {
            eta: params.eta2,
            eta_tilde: params.eta2,
            satisfied_armijo: arm,
            satisfied_curvature: curv,
            trials: self.trials.len(),
            fallback_used: budget_spent,
            capped_early: !budget_spent,
        })
    }

    fn accept(&self, eta: f64, arm: bool, params: &WolfeParams) -> SearchOutcome {
        SearchOutcome {
            eta: eta.min(params.eta2),
            eta_tilde: eta,
            satisfied_armijo: arm,
            satisfied_curvature: true,
            trials: self.trials.len(),
            fallback_used: false,
            capped_early: false,
        }
    }
}

/// Next zoom trial: secant root of `ψ` when it lands strictly inside the
/// interval, bisection otherwise or when the last secant step did not halve
/// the bracket.
fn zoom_point(lo: (f64, Option<f64>), hi: (f64, Option<f64>), force_bisect: bool) -> f64 {
    let mid = 0.5 * (lo.0 + hi.0);
    if force_bisect {
        return mid;
    }
    if let (Some(pl), Some(ph)) = (lo.1, hi.1) {
        let den = ph - pl;
        if den != 0.0 {
            let x = lo.0 - pl * (hi.0 - lo.0) / den;
            let (a, b) = if lo.0 < hi.0 { (lo.0, hi.0) } else { (hi.0, lo.0) };
            if x.is_finite() && x > a && x < b {
                return x;
            }
        }
    }
    mid
}

/// Bracketing and zoom for the strong Wolfe pair.
///
/// `phi0 = φ(0)`, `slope0 = ⟨∇f_B(w), d⟩` and `curv_ref = ⟨v, d⟩ < 0`.
/// A non-finite trial is treated as a sufficient-decrease failure.
pub fn wolfe_search<F>(
    mut eval: F,
    phi0: f64,
    slope0: f64,
    curv_ref: f64,
    params: &WolfeParams,
) -> Result<SearchOutcome>
where
    F: FnMut(f64) -> Trial,
{
    params.validate()?;
    if !(curv_ref < 0.0) {
        return Err(Error::invalid(format!("⟨v, d⟩ = {curv_ref} is not a descent slope")));
    }
    let mut memo = Memo { trials: Vec::new() };
    let mut probe = |eta: f64, memo: &mut Memo| {
        let t = eval(eta);
        let ok = t.finite();
        let arm = ok && armijo_holds(t.phi, phi0, slope0, eta, params.c1);
        let curv = ok && curvature_holds(t.psi, curv_ref, params.c2);
        memo.trials.push((eta, t, arm, curv));
        (t, ok, arm, curv)
    };

    // (step, ψ, φ) at the low end; ψ(0) equals ⟨v, d⟩ by construction
    let mut prev = (0.0, Some(curv_ref), phi0);
    let mut eta = params.initial_step();
    let mut bracket = None;
    for i in 0..params.max_bracket {
        let (t, ok, arm, curv) = probe(eta, &mut memo);
        if !ok || !arm || (i > 0 && t.phi >= prev.2) {
            bracket = Some((prev, (eta, ok.then_some(t.psi), t.phi)));
            break;
        }
        if curv {
            return Ok(memo.accept(eta, arm, params));
        }
        if t.psi >= 0.0 {
            bracket = Some(((eta, Some(t.psi), t.phi), (prev.0, prev.1, prev.2)));
            break;
        }
        // still descending past the cap: whatever is accepted later gets capped
        if eta >= params.eta2 {
            return memo.capped(params);
        }
        prev = (eta, Some(t.psi), t.phi);
        eta *= 2.0;
    }
    let Some((mut lo, mut hi)) = bracket else {
        return memo.fallback(params);
    };

    let mut force_bisect = false;
    for _ in 0..params.max_zoom {
        let width = (hi.0 - lo.0).abs();
        let x = zoom_point((lo.0, lo.1), (hi.0, hi.1), force_bisect);
        if !(x > 0.0) || x == lo.0 || x == hi.0 {
            break;
        }
        let (t, ok, arm, curv) = probe(x, &mut memo);
        if !ok || !arm || t.phi >= lo.2 {
            hi = (x, ok.then_some(t.psi), t.phi);
        } else {
            if curv {
                return Ok(memo.accept(x, arm, params));
            }
            if t.psi * (hi.0 - lo.0) >= 0.0 {
                hi = lo;
            }
            lo = (x, Some(t.psi), t.phi);
        }
        force_bisect = (hi.0 - lo.0).abs() > 0.5 * width;
    }
    memo.fallback(params)
}

/// Search for `|ψ(η)| ≤ -c2·⟨v_lag, d_lag⟩` alone; `eval` only needs to
/// fill [`Trial::psi`]. `psi0` is `ψ(0)` and `curv_ref` is
/// `⟨v_lag, d_lag⟩ < 0`.
pub fn curvature_only_search<F>(
    mut eval: F,
    psi0: f64,
    curv_ref: f64,
    params: &WolfeParams,
) -> Result<SearchOutcome>
where
    F: FnMut(f64) -> f64,
{
    params.validate()?;
    if !(curv_ref < 0.0) {
        return Err(Error::invalid(format!(
            "⟨v_lag, d_lag⟩ = {curv_ref} is not a descent slope"
        )));
    }
    let tol = -params.c2 * curv_ref;
    let mut memo = Memo { trials: Vec::new() };
    let mut probe = |eta: f64, memo: &mut Memo| {
        let psi = eval(eta);
        let curv = psi.is_finite() && psi.abs() <= tol;
        memo.trials.push((eta, Trial { phi: 0.0, psi }, false, curv));
        psi
    };
    let accept = |memo: &Memo, eta: f64| SearchOutcome {
        eta: eta.min(params.eta2),
        eta_tilde: eta,
        satisfied_armijo: false,
        satisfied_curvature: true,
        trials: memo.trials.len(),
        fallback_used: false,
        capped_early: false,
    };

    let mut lo = (0.0, psi0.is_finite().then_some(psi0));
    let mut eta = params.initial_step();
    let mut hi = None;
    for _ in 0..params.max_bracket {
        let psi = probe(eta, &mut memo);
        if psi.is_finite() && psi.abs() <= tol {
            return Ok(accept(&memo, eta));
        }
        if psi.is_finite() && psi < -tol {
            if eta >= params.eta2 {
                return memo.capped(params);
            }
            lo = (eta, Some(psi));
            eta *= 2.0;
        } else {
            hi = Some((eta, psi.is_finite().then_some(psi)));
            break;
        }
    }
    let Some(mut hi) = hi else {
        return memo.fallback(params);
    };

    let mut force_bisect = false;
    for _ in 0..params.max_zoom {
        let width = hi.0 - lo.0;
        let x = zoom_point(lo, hi, force_bisect);
        if x == lo.0 || x == hi.0 {
            break;
        }
        let psi = probe(x, &mut memo);
        if psi.is_finite() && psi.abs() <= tol {
            return Ok(accept(&memo, x));
        }
        if psi.is_finite() && psi < -tol {
            lo = (x, Some(psi));
        } else {
            hi = (x, psi.is_finite().then_some(psi));
        }
        force_bisect = hi.0 - lo.0 > 0.5 * width;
    }
    memo.fallback(params)
}

/// Trial evaluator over a fixed batch of a [`FiniteSum`].
///
/// Holds `w`, the direction `d`, the current estimator `v` and the batch
/// gradient at `w`. [`BatchLine::trial`] returns `φ(η)` and
/// `ψ(η) = ⟨v_next(η), d_ref⟩`, where `d_ref` is `d` unless set otherwise.
pub struct BatchLine<'a, O: FiniteSum + ?Sized> {
    obj: &'a O,
    batch: &'a [usize],
    w: &'a [f64],
    d: &'a [f64],
    v: &'a [f64],
    g_base: &'a [f64],
    d_ref: &'a [f64],
    point: Vec<f64>,
    grad: Vec<f64>,
}

impl<'a, O: FiniteSum + ?Sized> BatchLine<'a, O> {
    pub fn new(
        obj: &'a O,
        batch: &'a [usize],
        w: &'a [f64],
        d: &'a [f64],
        v: &'a [f64],
        g_base: &'a [f64],
    ) -> Self {
        let dim = w.len();
        BatchLine {
            obj,
            batch,
            w,
            d,
            v,
            g_base,
            d_ref: d,
            point: vec![0.0; dim],
            grad: vec![0.0; dim],
        }
    }

    /// Measure `ψ` along `d_ref` instead of the step direction.
    pub fn with_reference(mut self, d_ref: &'a [f64]) -> Self {
        self.d_ref = d_ref;
        self
    }

    /// `v_next(η) = ∇f_B(w + ηd) - ∇f_B(w) + v`.
    pub fn v_next(&mut self, eta: f64) -> (f64, Vec<f64>) {
        let phi = self.eval_grad(eta);
        let v = self
            .grad
            .iter()
            .zip(self.g_base)
            .zip(self.v)
            .map(|((g, gb), vi)| g - gb + vi)
            .collect();
        (phi, v)
    }

    fn eval_grad(&mut self, eta: f64) -> f64 {
        for ((p, wi), di) in self.point.iter_mut().zip(self.w).zip(self.d) {
            *p = wi + eta * di;
        }
        self.obj.batch_value_grad(&self.point, self.batch, &mut self.grad)
    }

    pub fn trial(&mut self, eta: f64) -> Trial {
        let phi = self.eval_grad(eta);
        let mut psi = 0.0;
        for (((g, gb), vi), di) in self.grad.iter().zip(self.g_base).zip(self.v).zip(self.d_ref) {
            psi += (g - gb + vi) * di;
        }
        Trial { phi, psi }
    }

    /// `ψ(0) = ⟨v, d_ref⟩`.
    pub fn psi0(&self) -> f64 {
        dot(self.v, self.d_ref)
    }

    /// `⟨∇f_B(w), d⟩`.
    pub fn slope0(&self) -> f64 {
        dot(self.g_base, self.d)
    }
}
