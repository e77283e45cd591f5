//! The l1 proximal operator, the proximal update and the gradient mapping.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// `φ(w) = λ‖w‖₁`; `λ = 0` makes the prox the identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regularizer {
    lambda: f64,
}

impl Regularizer {
    pub fn l1(lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::invalid(format!("l1 weight {lambda} must be finite and >= 0")));
        }
        Ok(Regularizer { lambda })
    }

    pub fn none() -> Self {
        Regularizer { lambda: 0.0 }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn value(&self, w: &[f64]) -> f64 {
        if self.lambda == 0.0 {
            0.0
        } else {
            self.lambda * crate::linalg::norm_l1(w)
        }
    }

    /// In-place `prox_{ηφ}`.
    pub(crate) fn prox_in_place(&self, eta: f64, v: &mut [f64]) {
        if self.lambda > 0.0 {
            shrink_in_place(v, eta * self.lambda);
        }
    }
}

#[inline]
fn shrink(x: f64, theta: f64) -> f64 {
    if x > theta {
        x - theta
    } else if x < -theta {
        x + theta
    } else {
        0.0
    }
}

fn shrink_in_place(v: &mut [f64], theta: f64) {
    for x in v {
        *x = shrink(*x, theta);
    }
}

/// Entrywise `sign(v_j) max(|v_j| - θ, 0)`.
pub fn soft_threshold(v: &[f64], theta: f64) -> Result<Vec<f64>> {
    if !(theta >= 0.0) {
        return Err(Error::invalid(format!("threshold {theta} must be >= 0")));
    }
    Ok(v.iter().map(|&x| shrink(x, theta)).collect())
}

fn check_step(eta: f64) -> Result<()> {
    if eta > 0.0 && eta.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("step {eta} must be positive and finite")))
    }
}

/// `y = prox_{ηφ}(w + η·dvec)`.
pub fn prox_step(w: &[f64], dvec: &[f64], eta: f64, reg: &Regularizer) -> Result<Vec<f64>> {
    check_step(eta)?;
    check_dim(w.len(), dvec.len())?;
    let mut y = w.to_vec();
    prox_step_into(w, dvec, eta, reg, &mut y);
    Ok(y)
}

pub(crate) fn prox_step_into(w: &[f64], dvec: &[f64], eta: f64, reg: &Regularizer, out: &mut [f64]) {
    for ((o, wi), di) in out.iter_mut().zip(w).zip(dvec) {
        *o = wi + eta * di;
    }
    reg.prox_in_place(eta, out);
}

/// `𝒢_η(w) = (w - prox_{ηφ}(w - η∇f(w))) / η`.
pub fn gradient_mapping(w: &[f64], eta: f64, grad: &[f64], reg: &Regularizer) -> Result<Vec<f64>> {
    check_step(eta)?;
    check_dim(w.len(), grad.len())?;
    if reg.lambda() == 0.0 {
        return Ok(grad.to_vec());
    }
    let mut p: Vec<f64> = w.iter().zip(grad).map(|(wi, gi)| wi - eta * gi).collect();
    reg.prox_in_place(eta, &mut p);
    Ok(w.iter().zip(&p).map(|(wi, pi)| (wi - pi) / eta).collect())
}

pub(crate) fn gradient_mapping_norm_sq(w: &[f64], eta: f64, grad: &[f64], reg: &Regularizer) -> f64 {
    if reg.lambda() == 0.0 {
        return crate::linalg::norm_sq(grad);
    }
    let theta = eta * reg.lambda();
    w.iter()
        .zip(grad)
        .map(|(&wi, &gi)| {
            let g = (wi - shrink(wi - eta * gi, theta)) / eta;
            g * g
        })
        .sum()
}

/// `(1-γ)·w + γ·y`.
pub fn momentum_combine(w: &[f64], y: &[f64], gamma: f64) -> Result<Vec<f64>> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::invalid(format!("momentum weight {gamma} must lie in (0, 1]")));
    }
    check_dim(w.len(), y.len())?;
    let mut out = w.to_vec();
    momentum_in_place(&mut out, y, gamma);
    Ok(out)
}

pub(crate) fn momentum_in_place(w: &mut [f64], y: &[f64], gamma: f64) {
    if gamma == 1.0 {
        w.copy_from_slice(y);
    } else {
        for (wi, yi) in w.iter_mut().zip(y) {
            *wi = (1.0 - gamma) * *wi + gamma * yi;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn soft_threshold_examples() {
        assert_eq!(soft_threshold(&[1.5, -0.2, 0.0], 1.0).unwrap(), vec![0.5, 0.0, 0.0]);
        let v = [0.3, -7.0, 2.5];
        assert_eq!(soft_threshold(&v, 0.0).unwrap(), v.to_vec());
        assert_eq!(soft_threshold(&[0.0; 4], 3.0).unwrap(), vec![0.0; 4]);
        assert!(soft_threshold(&v, -0.1).is_err());
    }

    #[test]
    fn prox_step_examples() {
        let w = [0.5, -1.0];
        let d = [2.0, 3.0];
        assert_eq!(
            prox_step(&w, &d, 0.25, &Regularizer::none()).unwrap(),
            vec![0.5 + 0.25 * 2.0, -1.0 + 0.25 * 3.0]
        );
        let reg = Regularizer::l1(0.2).unwrap();
        assert_eq!(prox_step(&[0.0], &[0.0], 1.0, &reg).unwrap(), vec![0.0]);
        let y = prox_step(&[1.0], &[-1.0], 0.5, &reg).unwrap();
        assert!((y[0] - 0.4).abs() < 1e-15);
        assert!(prox_step(&w, &d, 0.0, &reg).is_err());
        assert!(prox_step(&w, &d, -1.0, &reg).is_err());
    }

    #[test]
    fn gradient_mapping_examples() {
        let reg0 = Regularizer::none();
        assert_eq!(gradient_mapping(&[4.0, 1.0], 0.5, &[2.0, -3.0], &reg0).unwrap(), vec![2.0, -3.0]);
        let reg = Regularizer::l1(0.7).unwrap();
        assert_eq!(gradient_mapping(&[0.0; 2], 0.5, &[0.0; 2], &reg).unwrap(), vec![0.0; 2]);
        let reg = Regularizer::l1(0.3).unwrap();
        let g = gradient_mapping(&[1.0], 1.0, &[0.0], &reg).unwrap();
        assert!((g[0] - 0.3).abs() < 1e-15);
        assert!(gradient_mapping(&[1.0], 0.0, &[0.0], &reg).is_err());
    }

    #[test]
    fn gradient_mapping_norm_matches_vector() {
        let reg = Regularizer::l1(0.1).unwrap();
        let w = [0.3, -0.05, 0.0, 2.0];
        let g = [1.0, 0.02, -0.3, 0.0];
        let full = gradient_mapping(&w, 0.5, &g, &reg).unwrap();
        let n2: f64 = full.iter().map(|x| x * x).sum();
        assert!((gradient_mapping_norm_sq(&w, 0.5, &g, &reg) - n2).abs() < 1e-15);
    }

    #[test]
    fn momentum_examples() {
        let w = [1.0, 2.0];
        let y = [3.0, -4.0];
        assert_eq!(momentum_combine(&w, &y, 1.0).unwrap(), y.to_vec());
        assert_eq!(momentum_combine(&w, &w, 0.3).unwrap(), w.to_vec());
        assert_eq!(momentum_combine(&[0.0], &[2.0], 0.25).unwrap(), vec![0.5]);
        assert!(momentum_combine(&w, &y, 0.0).is_err());
        assert!(momentum_combine(&w, &y, 1.5).is_err());
    }

    #[test]
    fn regularizer_validation() {
        assert!(Regularizer::l1(-1e-9).is_err());
        assert!(Regularizer::l1(f64::NAN).is_err());
        assert_eq!(Regularizer::l1(0.0).unwrap(), Regularizer::none());
    }
}
