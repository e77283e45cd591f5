//! Rate constants, convergence radii and parameter feasibility for the
//! accelerated family. Everything here is a pure function of its inputs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Analysis inputs. `alpha`, `tau`, `sigma` and `beta_hat` are assumed
/// bounds, not measured quantities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheoryInputs {
    pub m: usize,
    pub b: usize,
    pub n: usize,
    pub eta1: f64,
    pub eta2: f64,
    pub gamma: f64,
    pub beta_hat: f64,
    pub alpha: f64,
    #[serde(default)]
    pub tau: f64,
    #[serde(default)]
    pub sigma: f64,
    #[serde(rename = "L")]
    pub l: f64,
    /// Switching frequency; fixes `q = ⌊(m-1)/t⌋` when `q` is absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_o: Option<f64>,
    /// Optimality gaps for the radii, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_st: Option<f64>,
}

impl TheoryInputs {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta_hat > 0.0 && self.beta_hat < 1.0) {
            return Err(Error::Domain(format!("beta_hat = {} must lie in (0, 1)", self.beta_hat)));
        }
        if !(self.alpha > 1.0) {
            return Err(Error::Domain(format!("alpha = {} must exceed 1", self.alpha)));
        }
        for (name, x) in [("eta1", self.eta1), ("eta2", self.eta2), ("L", self.l)] {
            if !(x > 0.0 && x.is_finite()) {
                return Err(Error::Domain(format!("{name} = {x} must be positive")));
            }
        }
        if self.m == 0 || self.b == 0 || self.b > self.n || self.n < 2 {
            return Err(Error::Domain(format!(
                "need m >= 1, n >= 2 and 1 <= b <= n (m = {}, b = {}, n = {})",
                self.m, self.b, self.n
            )));
        }
        if !(self.tau >= 0.0 && self.sigma >= 0.0) {
            return Err(Error::Domain("tau and sigma must be nonnegative".into()));
        }
        Ok(())
    }

    /// Conjugate steps per epoch of the switching variant.
    pub fn q(&self) -> Option<usize> {
        self.q.or_else(|| self.t.filter(|&t| t > 0).map(|t| (self.m.saturating_sub(1)) / t))
    }
}

/// `Φ(x) = (1+x)/(1-x)` on `[0, 1)`.
pub fn phi(x: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&x) {
        return Err(Error::Domain(format!("Φ needs 0 <= x < 1, got {x}")));
    }
    Ok((1.0 + x) / (1.0 - x))
}

fn check_beta(beta_hat: f64) -> Result<()> {
    if beta_hat > 0.0 && beta_hat < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("beta_hat = {beta_hat} must lie in (0, 1)")))
    }
}

/// `(ξ, C)` for the standard and restart variants.
pub fn rate_constants(inp: &TheoryInputs) -> Result<(f64, f64)> {
    check_beta(inp.beta_hat)?;
    let (a, bh) = (inp.alpha, inp.beta_hat);
    let xi = (2.0 + 4.0 * inp.eta2 * inp.eta2) * a * bh * bh
        / ((inp.m as f64 + 1.0) * inp.eta1 * inp.eta1 * (1.0 - bh).powi(2) * (1.0 + bh));
    let c = ((1.0 - bh) * inp.tau / a + (1.0 - bh).powi(2) * (1.0 + bh) / (2.0 * a * bh * bh))
        * inp.sigma
        * inp.sigma;
    Ok((xi, c))
}

/// `(ξ₂, C₂)`, the `α = 2` specialization.
pub fn rate_constants_c2_small(inp: &TheoryInputs) -> Result<(f64, f64)> {
    check_beta(inp.beta_hat)?;
    let bh = inp.beta_hat;
    let xi2 = (2.0 + 4.0 * inp.eta2 * inp.eta2) * bh * bh
        / ((inp.m as f64 + 1.0) * inp.eta1 * inp.eta1 * (1.0 - bh).powi(2));
    let c2 = ((1.0 - bh) * inp.tau / (1.0 + bh) + (1.0 - bh).powi(2) / (2.0 * bh * bh))
        * inp.sigma
        * inp.sigma;
    Ok((xi2, c2))
}

/// `(ξˢᵗ, Cˢᵗ)` for the switching variant with `q` conjugate steps.
pub fn st_rate_constants(inp: &TheoryInputs) -> Result<(f64, f64)> {
    let q = inp
        .q()
        .ok_or_else(|| Error::Domain("switching constants need t or q".into()))?;
    if q < 1 {
        return Err(Error::Domain(format!("q = {q} must be at least 1")));
    }
    let (xi, _) = rate_constants(inp)?;
    let (a, bh) = (inp.alpha, inp.beta_hat);
    let bq = bh.powi(q as i32);
    let xi_st = xi * (1.0 - bq);
    let c_st = ((1.0 - bh) * (1.0 + bq) * inp.tau / a
        + (1.0 - bh).powi(2) * (1.0 + bh) / (2.0 * a * bh * bh * (1.0 - bq)))
        * inp.sigma
        * inp.sigma;
    Ok((xi_st, c_st))
}

/// The two sides of the batch/momentum condition:
/// `(2+4η₂²)·(n-b)/(b(n-1))·L²γ²·M` and `2/η₂ - Lγ - 3`, with
/// `M = m` or `M = m + q - 1` when `q` is given.
pub fn feasibility_sides(b: usize, gamma: f64, m: usize, eta2: f64, l: f64, n: usize, q: Option<usize>) -> (f64, f64) {
    let big_m = match q {
        Some(q) => (m + q) as f64 - 1.0,
        None => m as f64,
    };
    let (nf, bf) = (n as f64, b as f64);
    let lhs = (2.0 + 4.0 * eta2 * eta2) * (nf - bf) / (bf * (nf - 1.0)) * l * l * gamma * gamma * big_m;
    let rhs = 2.0 / eta2 - l * gamma - 3.0;
    (lhs, rhs)
}

/// True when `lhs - rhs ≤ 0`, up to a rounding allowance of `1e-12`
/// times the magnitude of the terms, so that boundary points pass.
pub fn check_feasibility(b: usize, gamma: f64, m: usize, eta2: f64, l: f64, n: usize, q: Option<usize>) -> bool {
    let (lhs, rhs) = feasibility_sides(b, gamma, m, eta2, l, n, q);
    let scale = lhs.abs() + 2.0 / eta2 + (l * gamma).abs() + 3.0;
    lhs - rhs <= 1e-12 * scale
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaSuggestion {
    pub gamma: f64,
    /// `η₂ = 2/3` makes the bound zero.
    pub degenerate: bool,
}

/// `ϖ(b) = (1+2η₂²)(n-b)/(η₂ b (n-1))`.
pub fn varpi(eta2: f64, n: usize, b: usize) -> f64 {
    let (nf, bf) = (n as f64, b as f64);
    (1.0 + 2.0 * eta2 * eta2) * (nf - bf) / (eta2 * bf * (nf - 1.0))
}

/// Largest momentum weight allowed by the feasibility condition:
/// `min{(2-3η₂)/(η₂L), (-1+√(1-24mη₂ϖ+16mϖ))/(4Lη₂mϖ)}`.
pub fn suggested_gamma(m: usize, eta2: f64, l: f64, n: usize, b: usize) -> Result<GammaSuggestion> {
    if !(eta2 > 0.0 && eta2 <= 2.0 / 3.0) {
        return Err(Error::Domain(format!("eta2 = {eta2} must lie in (0, 2/3]")));
    }
    if !(l > 0.0) || m == 0 || b == 0 || b > n || n < 2 {
        return Err(Error::Domain("need L > 0, m >= 1, n >= 2 and 1 <= b <= n".into()));
    }
    let first = (2.0 - 3.0 * eta2) / (eta2 * l);
    let w = varpi(eta2, n, b);
    let gamma = if w == 0.0 {
        first
    } else {
        let x = 8.0 * m as f64 * w * (2.0 - 3.0 * eta2);
        if 1.0 + x < 0.0 {
            return Err(Error::Domain(format!("negative discriminant {}; choose gamma manually", 1.0 + x)));
        }
        // (-1 + √(1+x)) / (4Lη₂mϖ) rewritten without the cancellation
        first.min(2.0 * first / (1.0 + (1.0 + x).sqrt()))
    };
    Ok(GammaSuggestion {
        gamma,
        degenerate: gamma <= 0.0,
    })
}

/// `ξ' = τ_o / ((m+1)η₁²γ)` under gradient dominance.
pub fn gd_rate(tau_o: f64, m: usize, eta1: f64, gamma: f64) -> f64 {
    tau_o / ((m as f64 + 1.0) * eta1 * eta1 * gamma)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Radii {
    /// `ξ(δ + C)/(1 - ξ)`
    pub delta: f64,
    /// `ξδ/(1 - ξ)`
    pub delta_bar: f64,
    /// `ξˢᵗ(δˢᵗ + C)/(1 - ξˢᵗ)`, when switching constants are supplied.
    pub delta_st: Option<f64>,
}

/// Convergence radii. `st` is `(ξˢᵗ, δˢᵗ)`.
pub fn radii(xi: f64, delta: f64, c: f64, st: Option<(f64, f64)>) -> Result<Radii> {
    let contract = |x: f64| {
        if (0.0..1.0).contains(&x) {
            Ok(())
        } else {
            Err(Error::Domain(format!("rate {x} must lie in [0, 1)")))
        }
    };
    contract(xi)?;
    let delta_st = match st {
        Some((xi_st, d_st)) => {
            contract(xi_st)?;
            Some(xi_st * (d_st + c) / (1.0 - xi_st))
        }
        None => None,
    };
    Ok(Radii {
        delta: xi * (delta + c) / (1.0 - xi),
        delta_bar: xi * delta / (1.0 - xi),
        delta_st,
    })
}

/// Everything computable from one set of inputs, for reporting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryReport {
    pub xi: f64,
    pub c: f64,
    pub xi2: f64,
    pub c2: f64,
    pub xi_st: Option<f64>,
    pub c_st: Option<f64>,
    pub feasible: bool,
    pub feasible_st: Option<bool>,
    pub suggested_gamma: Option<GammaSuggestion>,
    pub gd_rate: Option<f64>,
    pub radii: Option<Radii>,
}

pub fn report(inp: &TheoryInputs) -> Result<TheoryReport> {
    inp.validate()?;
    let (xi, c) = rate_constants(inp)?;
    let (xi2, c2) = rate_constants_c2_small(inp)?;
    let st = match inp.q() {
        Some(q) if q >= 1 => Some(st_rate_constants(inp)?),
        _ => None,
    };
    let q = inp.q();
    let radii = match inp.delta {
        Some(delta) if xi < 1.0 => {
            let st_pair = match (st, inp.delta_st) {
                (Some((xs, _)), Some(ds)) if xs < 1.0 => Some((xs, ds)),
                _ => None,
            };
            Some(radii(xi, delta, c, st_pair)?)
        }
        _ => None,
    };
    Ok(TheoryReport {
        xi,
        c,
        xi2,
        c2,
        xi_st: st.map(|s| s.0),
        c_st: st.map(|s| s.1),
        feasible: check_feasibility(inp.b, inp.gamma, inp.m, inp.eta2, inp.l, inp.n, None),
        feasible_st: q.map(|q| check_feasibility(inp.b, inp.gamma, inp.m, inp.eta2, inp.l, inp.n, Some(q))),
        suggested_gamma: suggested_gamma(inp.m, inp.eta2, inp.l, inp.n, inp.b).ok(),
        gd_rate: inp.tau_o.map(|t| gd_rate(t, inp.m, inp.eta1, inp.gamma)),
        radii,
    })
}
