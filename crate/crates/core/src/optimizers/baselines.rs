use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::BatchSampler;
use crate::directions::sarah_in_place;
use crate::error::{check_dim, Result};
use crate::objective::FiniteSum;
use crate::prox::{momentum_in_place, prox_step_into, Regularizer};

use super::{BaselineConfig, BaselineKind, RunTrace, Tracker};

/// Dispatches on `cfg.kind`.
pub fn run_baseline<O: FiniteSum + ?Sized>(
    cfg: &BaselineConfig,
    obj: &O,
    reg: &Regularizer,
    w0: &[f64],
) -> Result<RunTrace> {
    match cfg.kind {
        BaselineKind::ProxSarah | BaselineKind::ProxSpiderboost => run_sarah_type(cfg, obj, reg, w0),
        BaselineKind::ProxSvrgPlus => run_svrg_type(cfg, obj, reg, w0),
    }
}

pub fn run_prox_sarah<O: FiniteSum + ?Sized>(
    cfg: &BaselineConfig,
    obj: &O,
    reg: &Regularizer,
    w0: &[f64],
) -> Result<RunTrace> {
    let cfg = BaselineConfig { kind: BaselineKind::ProxSarah, ..cfg.clone() };
    run_sarah_type(&cfg, obj, reg, w0)
}

pub fn run_prox_spiderboost<O: FiniteSum + ?Sized>(
    cfg: &BaselineConfig,
    obj: &O,
    reg: &Regularizer,
    w0: &[f64],
) -> Result<RunTrace> {
    let cfg = BaselineConfig { kind: BaselineKind::ProxSpiderboost, ..cfg.clone() };
    run_sarah_type(&cfg, obj, reg, w0)
}

pub fn run_prox_svrg_plus<O: FiniteSum + ?Sized>(
    cfg: &BaselineConfig,
    obj: &O,
    reg: &Regularizer,
    w0: &[f64],
) -> Result<RunTrace> {
    let cfg = BaselineConfig { kind: BaselineKind::ProxSvrgPlus, ..cfg.clone() };
    run_svrg_type(&cfg, obj, reg, w0)
}

fn descend(w: &mut [f64], v: &[f64], eta: f64, gamma: f64, reg: &Regularizer, neg: &mut [f64], y: &mut [f64]) {
    for (ni, vi) in neg.iter_mut().zip(v) {
        *ni = -vi;
    }
    prox_step_into(w, neg, eta, reg, y);
    momentum_in_place(w, y, gamma);
}

/// SARAH estimator with a fixed step: `m` proximal steps per epoch, the
/// first from the full gradient.
fn run_sarah_type<O: FiniteSum + ?Sized>(
    cfg: &BaselineConfig,
    obj: &O,
    reg: &Regularizer,
    w0: &[f64],
) -> Result<RunTrace> {
    let n = obj.num_examples();
    let dim = obj.dim();
    check_dim(dim, w0.len())?;
    cfg.validate(n)?;
    let echo = serde_json::to_value(cfg).unwrap_or_default();
    let mut tr = Tracker::new(obj, reg, cfg.kind.name(), echo, cfg.metric_eta, cfg.max_passes);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut sampler = BatchSampler::new(n, cfg.b)?;

    let mut w = w0.to_vec();
    let mut full_grad = tr.record(0, &w)?;
    let mut v = vec![0.0; dim];
    let mut w_prev = vec![0.0; dim];
    let mut g_cur = vec![0.0; dim];
    let mut g_prev = vec![0.0; dim];
    let mut neg = vec![0.0; dim];
    let mut y = vec![0.0; dim];

    for epoch in 1..=cfg.epochs {
        v.copy_from_slice(&full_grad);
        tr.charge(n);
        w_prev.copy_from_slice(&w);
        descend(&mut w, &v, cfg.eta, cfg.gamma, reg, &mut neg, &mut y);
        for _ in 1..cfg.m {
            let batch = sampler.draw(&mut rng);
            obj.batch_value_grad(&w, &batch, &mut g_cur);
            obj.batch_value_grad(&w_prev, &batch, &mut g_prev);
            tr.charge(2 * cfg.b);
            sarah_in_place(&mut v, &g_cur, &g_prev);
            w_prev.copy_from_slice(&w);
            descend(&mut w, &v, cfg.eta, cfg.gamma, reg, &mut neg, &mut y);
        }
        full_grad = tr.record(epoch, &w)?;
        if tr.budget_exhausted() {
            break;
        }
    }
    Ok(tr.finish(w))
}

/// SVRG estimator `v_k = ∇f_b(w_k) - ∇f_b(w̃) + ∇f_B(w̃)` around a
/// per-epoch snapshot.
fn run_svrg_type<O: FiniteSum + ?Sized>(
    cfg: &BaselineConfig,
    obj: &O,
    reg: &Regularizer,
    w0: &[f64],
) -> Result<RunTrace> {
    let n = obj.num_examples();
    let dim = obj.dim();
    check_dim(dim, w0.len())?;
    cfg.validate(n)?;
    let echo = serde_json::to_value(cfg).unwrap_or_default();
    let mut tr = Tracker::new(obj, reg, cfg.kind.name(), echo, cfg.metric_eta, cfg.max_passes);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let snap_b = cfg.snapshot_batch.unwrap_or(n);
    let mut snap_sampler = BatchSampler::new(n, snap_b)?;
    let mut sampler = BatchSampler::new(n, cfg.b)?;

    let mut w = w0.to_vec();
    let mut full_grad = tr.record(0, &w)?;
    let mut snap_grad = vec![0.0; dim];
    let mut snapshot = vec![0.0; dim];
    let mut v = vec![0.0; dim];
    let mut g_cur = vec![0.0; dim];
    let mut g_snap = vec![0.0; dim];
    let mut neg = vec![0.0; dim];
    let mut y = vec![0.0; dim];

    for epoch in 1..=cfg.epochs {
        snapshot.copy_from_slice(&w);
        if snap_b == n {
            snap_grad.copy_from_slice(&full_grad);
        } else {
            let big = snap_sampler.draw(&mut rng);
            obj.batch_value_grad(&snapshot, &big, &mut snap_grad);
        }
        tr.charge(snap_b);
        // k = 0 sits on the snapshot, so v_0 is the snapshot gradient
        v.copy_from_slice(&snap_grad);
        descend(&mut w, &v, cfg.eta, cfg.gamma, reg, &mut neg, &mut y);
        for _ in 1..cfg.m {
            let batch = sampler.draw(&mut rng);
            obj.batch_value_grad(&w, &batch, &mut g_cur);
            obj.batch_value_grad(&snapshot, &batch, &mut g_snap);
            tr.charge(2 * cfg.b);
            for (((vi, gc), gs), sg) in v.iter_mut().zip(&g_cur).zip(&g_snap).zip(&snap_grad) {
                *vi = gc - gs + sg;
            }
            descend(&mut w, &v, cfg.eta, cfg.gamma, reg, &mut neg, &mut y);
        }
        full_grad = tr.record(epoch, &w)?;
        if tr.budget_exhausted() {
            break;
        }
    }
    Ok(tr.finish(w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dot;

    /// `f_i(w) = ½‖w - c_i‖²`, so `∇f_i` is exact and `L = 1`.
    struct Centers(Vec<Vec<f64>>);

    impl FiniteSum for Centers {
        fn num_examples(&self) -> usize {
            self.0.len()
        }
        fn dim(&self) -> usize {
            self.0[0].len()
        }
        fn batch_value_grad(&self, w: &[f64], batch: &[usize], grad: &mut [f64]) -> f64 {
            grad.fill(0.0);
            let s = 1.0 / batch.len() as f64;
            let mut f = 0.0;
            for &i in batch {
                for ((g, wi), ci) in grad.iter_mut().zip(w).zip(&self.0[i]) {
                    *g += s * (wi - ci);
                    f += 0.5 * s * (wi - ci) * (wi - ci);
                }
            }
            f
        }
        fn batch_value(&self, w: &[f64], batch: &[usize]) -> f64 {
            let mut g = vec![0.0; w.len()];
            self.batch_value_grad(w, batch, &mut g)
        }
    }

    fn centers() -> Centers {
        Centers((0..12).map(|i| vec![i as f64 / 6.0, 1.0 - i as f64 / 12.0, 0.5]).collect())
    }

    #[test]
    fn full_batch_spiderboost_is_gradient_descent() {
        let p = centers();
        let mut cfg = BaselineConfig::prox_spiderboost(12, 1.0, 3);
        cfg.b = 12;
        let tr = run_prox_spiderboost(&cfg, &p, &Regularizer::none(), &[0.0; 3]).unwrap();
        // GD on ½‖w - c̄‖² with η = ½ halves the distance each step
        let mean: Vec<f64> = (0..3).map(|j| p.0.iter().map(|c| c[j]).sum::<f64>() / 12.0).collect();
        let steps = (3 * cfg.m) as i32;
        let expect: Vec<f64> = mean.iter().map(|c| c * (1.0 - 0.5f64.powi(steps))).collect();
        for (a, b) in tr.w_final.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn baselines_decrease_objective() {
        let p = centers();
        let reg = Regularizer::l1(1e-3).unwrap();
        for kind in [BaselineKind::ProxSarah, BaselineKind::ProxSpiderboost, BaselineKind::ProxSvrgPlus] {
            let cfg = BaselineConfig::for_kind(kind, 12, 1.0, 5);
            let tr = run_baseline(&cfg, &p, &reg, &[0.0; 3]).unwrap();
            assert_eq!(tr.records.len(), 6);
            assert!(tr.final_record().objective < tr.records[0].objective, "{kind:?}");
            assert_eq!(tr.algorithm, kind.name());
        }
    }

    #[test]
    fn svrg_full_batch_is_exact_gradient() {
        let p = centers();
        let mut cfg = BaselineConfig::prox_svrg_plus(12, 1.0, 2);
        cfg.b = 12;
        cfg.snapshot_batch = Some(12);
        cfg.m = 4;
        cfg.eta = 0.5;
        let tr = run_prox_svrg_plus(&cfg, &p, &Regularizer::none(), &[0.0; 3]).unwrap();
        let mean: Vec<f64> = (0..3).map(|j| p.0.iter().map(|c| c[j]).sum::<f64>() / 12.0).collect();
        let r = 0.5f64.powi(8);
        let expect: Vec<f64> = mean.iter().map(|c| c * (1.0 - r)).collect();
        let diff: Vec<f64> = tr.w_final.iter().zip(&expect).map(|(a, b)| a - b).collect();
        assert!(dot(&diff, &diff).sqrt() < 1e-12);
    }
}
