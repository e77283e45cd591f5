//! Nonconvex margin losses for binary classification.
//!
//! Each loss is a function of the margin `u = b_i a_i^T w`; the gradient
//! of the per-example loss is `g(u) b_i a_i`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::SparseDataset;
use crate::error::{check_dim, Error, Result};
use crate::linalg;
use crate::objective::FiniteSum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// `ln(1 + (u-1)^2)` for `u <= 1`, zero beyond.
    #[serde(alias = "a")]
    Lorenz,
    /// `1 - tanh(u)`.
    #[serde(alias = "b", alias = "sigmoid")]
    NormalizedSigmoid,
    /// `ln(1 + e^{-u}) - ln(1 + e^{-u-1})`.
    #[serde(alias = "c")]
    LogisticDifference,
    /// `(1 - sigmoid(u))^2`, the squared loss of a two-layer network output.
    #[serde(alias = "d", alias = "nn")]
    TwoLayerNn,
}

impl LossKind {
    pub const ALL: [LossKind; 4] = [
        LossKind::Lorenz,
        LossKind::NormalizedSigmoid,
        LossKind::LogisticDifference,
        LossKind::TwoLayerNn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LossKind::Lorenz => "lorenz",
            LossKind::NormalizedSigmoid => "normalized_sigmoid",
            LossKind::LogisticDifference => "logistic_difference",
            LossKind::TwoLayerNn => "two_layer_nn",
        }
    }

    /// Loss at margin `u`. Callers guarantee `u` is not NaN.
    #[inline]
    pub fn value(self, u: f64) -> f64 {
        match self {
            LossKind::Lorenz => {
                if u <= 1.0 {
                    let x = u - 1.0;
                    if x.abs() > 1e150 {
                        2.0 * x.abs().ln()
                    } else {
                        (x * x).ln_1p()
                    }
                } else {
                    0.0
                }
            }
            LossKind::NormalizedSigmoid => {
                if u > 0.0 {
                    // 1 - tanh(u) = 2e^{-2u} / (1 + e^{-2u})
                    let e = (-2.0 * u).exp();
                    2.0 * e / (1.0 + e)
                } else {
                    1.0 - u.tanh()
                }
            }
            LossKind::LogisticDifference => softplus(-u) - softplus(-u - 1.0),
            LossKind::TwoLayerNn => {
                let s = sigmoid(-u);
                s * s
            }
        }
    }

    /// Derivative of the loss with respect to the margin.
    #[inline]
    pub fn grad_coeff(self, u: f64) -> f64 {
        match self {
            LossKind::Lorenz => {
                if u <= 1.0 {
                    let x = u - 1.0;
                    2.0 * x / (1.0 + x * x)
                } else {
                    0.0
                }
            }
            LossKind::NormalizedSigmoid => {
                // -1/cosh^2(u) = -4e^{-2|u|} / (1 + e^{-2|u|})^2
                let e = (-2.0 * u.abs()).exp();
                -4.0 * e / ((1.0 + e) * (1.0 + e))
            }
            LossKind::LogisticDifference => sigmoid(-u - 1.0) - sigmoid(-u),
            LossKind::TwoLayerNn => {
                let s = sigmoid(-u);
                -2.0 * s * s * sigmoid(u)
            }
        }
    }

    pub fn lipschitz(self) -> f64 {
        match self {
            LossKind::Lorenz => 4.0,
            LossKind::NormalizedSigmoid => 0.7698,
            LossKind::LogisticDifference => 0.092372,
            LossKind::TwoLayerNn => 0.15405,
        }
    }

    pub fn checked_value(self, u: f64) -> Result<f64> {
        if u.is_nan() {
            return Err(Error::invalid("margin is NaN"));
        }
        Ok(self.value(u))
    }

    pub fn checked_grad_coeff(self, u: f64) -> Result<f64> {
        if u.is_nan() {
            return Err(Error::invalid("margin is NaN"));
        }
        Ok(self.grad_coeff(u))
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lorenz" | "a" => Ok(LossKind::Lorenz),
            "normalized_sigmoid" | "sigmoid" | "b" => Ok(LossKind::NormalizedSigmoid),
            "logistic_difference" | "c" => Ok(LossKind::LogisticDifference),
            "two_layer_nn" | "nn" | "d" => Ok(LossKind::TwoLayerNn),
            other => Err(Error::invalid(format!("unknown loss {other:?}"))),
        }
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// A loss together with its smoothness constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossModel {
    pub kind: LossKind,
    pub lipschitz: f64,
}

impl From<LossKind> for LossModel {
    fn from(kind: LossKind) -> Self {
        LossModel {
            kind,
            lipschitz: kind.lipschitz(),
        }
    }
}

/// `f(w) = (1/n) Σ loss(b_i a_i^T w)` over a sparse dataset.
#[derive(Debug, Clone, Copy)]
pub struct LossObjective<'a> {
    data: &'a SparseDataset,
    kind: LossKind,
}

impl<'a> LossObjective<'a> {
    pub fn new(data: &'a SparseDataset, kind: LossKind) -> Self {
        LossObjective { data, kind }
    }

    pub fn data(&self) -> &'a SparseDataset {
        self.data
    }

    pub fn kind(&self) -> LossKind {
        self.kind
    }

    #[inline]
    pub fn margin(&self, w: &[f64], i: usize) -> f64 {
        self.data.label(i) * self.data.row(i).dot(w)
    }

    fn check(&self, w: &[f64], batch: &[usize]) -> Result<()> {
        check_dim(self.data.d(), w.len())?;
        if batch.is_empty() {
            return Err(Error::invalid("empty batch"));
        }
        if let Some(&bad) = batch.iter().find(|&&i| i >= self.data.n()) {
            return Err(Error::invalid(format!("batch index {bad} out of range")));
        }
        Ok(())
    }

    /// `f_B(w)`, the mean loss over the batch.
    pub fn batch_loss(&self, w: &[f64], batch: &[usize]) -> Result<f64> {
        self.check(w, batch)?;
        Ok(self.batch_value(w, batch))
    }

    /// `∇f_B(w)` as a dense vector.
    pub fn batch_gradient(&self, w: &[f64], batch: &[usize]) -> Result<Vec<f64>> {
        self.check(w, batch)?;
        let mut g = vec![0.0; self.data.d()];
        self.batch_value_grad(w, batch, &mut g);
        Ok(g)
    }

    /// `P(w) = f(w) + λ‖w‖₁`.
    pub fn full_objective(&self, w: &[f64], lambda: f64) -> Result<f64> {
        if !(lambda >= 0.0) {
            return Err(Error::invalid(format!("l1 weight {lambda} must be >= 0")));
        }
        check_dim(self.data.d(), w.len())?;
        if self.data.n() == 0 {
            return Err(Error::invalid("empty dataset"));
        }
        Ok(self.full_value(w) + lambda * linalg::norm_l1(w))
    }
}

impl FiniteSum for LossObjective<'_> {
    fn num_examples(&self) -> usize {
        self.data.n()
    }

    fn dim(&self) -> usize {
        self.data.d()
    }

    fn batch_value_grad(&self, w: &[f64], batch: &[usize], grad: &mut [f64]) -> f64 {
        grad.fill(0.0);
        let inv_b = 1.0 / batch.len() as f64;
        let mut total = 0.0;
        for &i in batch {
            let label = self.data.label(i);
            let row = self.data.row(i);
            let u = label * row.dot(w);
            total += self.kind.value(u);
            let c = self.kind.grad_coeff(u);
            if c != 0.0 {
                row.scatter_add(c * label * inv_b, grad);
            }
        }
        total * inv_b
    }

    fn batch_value(&self, w: &[f64], batch: &[usize]) -> f64 {
        let total: f64 = batch.iter().map(|&i| self.kind.value(self.margin(w, i))).sum();
        total / batch.len() as f64
    }

    fn full_value_grad(&self, w: &[f64], grad: &mut [f64]) -> f64 {
        grad.fill(0.0);
        let n = self.data.n();
        let inv_n = 1.0 / n as f64;
        let mut total = 0.0;
        for (row, &label) in self.data.rows().iter().zip(self.data.labels()) {
            let u = label * row.dot(w);
            total += self.kind.value(u);
            let c = self.kind.grad_coeff(u);
            if c != 0.0 {
                row.scatter_add(c * label * inv_n, grad);
            }
        }
        total * inv_n
    }

    fn full_value(&self, w: &[f64]) -> f64 {
        let total: f64 = self
            .data
            .rows()
            .iter()
            .zip(self.data.labels())
            .map(|(row, &label)| self.kind.value(label * row.dot(w)))
            .sum();
        total / self.data.n() as f64
    }

    fn lipschitz(&self) -> Option<f64> {
        Some(self.kind.lipschitz())
    }
}
