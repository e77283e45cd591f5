use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::BatchSampler;
use crate::directions::sarah_in_place;
use crate::error::{check_dim, Result};
use crate::linalg::{dist_sq, dot, norm_sq};
use crate::linesearch::{curvature_only_search, wolfe_search, BatchLine, SearchOutcome};
use crate::objective::FiniteSum;
use crate::prox::{momentum_in_place, prox_step_into, Regularizer};

use super::{AccConfig, OutputMode, Tracker, Variant};

/// Runs the configured member of the family.
///
/// Epoch `s` starts from `w_0 = w̃_{s-1}` with `v_0 = ∇f(w_0)` and a first
/// direction `d_0` (`-h` carried from the previous epoch, or `-v_0` for the
/// restart variant). The first step is searched on a freshly drawn batch
/// whose base gradient is charged to the search. Inner steps
/// `k = 1..m-1` update `v` by SARAH, form `d_k`, pick a step and apply the
/// proximal and momentum updates. `h` becomes the last estimator
/// `v_{m-1}` and the epoch output is `w_m`.
pub fn run_acc<O: FiniteSum + ?Sized>(
    cfg: &AccConfig,
    obj: &O,
    reg: &Regularizer,
    w0: &[f64],
) -> Result<crate::optimizers::RunTrace> {
    run_acc_observed(cfg, obj, reg, w0, |_| {})
}

/// What one inner step used, reported before the step is applied.
#[derive(Debug, Clone, Copy)]
pub struct StepEvent<'a> {
    pub epoch: usize,
    pub k: usize,
    pub v: &'a [f64],
    pub d: &'a [f64],
    pub eta: f64,
    /// False when the step came from `eta_f` without a search.
    pub searched: bool,
}

/// [`run_acc`] with a callback invoked at every inner step.
pub fn run_acc_observed<O, F>(
    cfg: &AccConfig,
    obj: &O,
    reg: &Regularizer,
    w0: &[f64],
    mut observe: F,
) -> Result<crate::optimizers::RunTrace>
where
    O: FiniteSum + ?Sized,
    F: FnMut(&StepEvent<'_>),
{
    let n = obj.num_examples();
    let dim = obj.dim();
    check_dim(dim, w0.len())?;
    cfg.validate(n)?;

    let echo = serde_json::to_value(cfg).unwrap_or_default();
    let mut tr = Tracker::new(obj, reg, cfg.variant.algorithm_name(), echo, cfg.metric_eta, cfg.max_passes);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut sampler = BatchSampler::new(n, cfg.b)?;
    let b = cfg.b;

    let mut w = w0.to_vec();
    let mut full_grad = tr.record(0, &w)?;
    // carried direction source h; initially ∇f(w̃_0)
    let mut h = full_grad.clone();

    let mut v = vec![0.0; dim];
    let mut v_prev = vec![0.0; dim];
    let mut d = vec![0.0; dim];
    let mut d_prev = vec![0.0; dim];
    let mut g_cur = vec![0.0; dim];
    let mut g_prev = vec![0.0; dim];
    let mut w_prev = vec![0.0; dim];
    let mut y = vec![0.0; dim];
    // ST lag state: estimator and direction at the last schedule point
    let mut v_lag = vec![0.0; dim];
    let mut d_lag = vec![0.0; dim];
    let mut w_out = vec![0.0; dim];

    for epoch in 1..=cfg.epochs {
        let pick = match cfg.output {
            OutputMode::Last => cfg.m,
            OutputMode::Uniform => rng.random_range(1..=cfg.m as u64) as usize,
        };

        // v_0 = ∇f(w_0), reusing the metric gradient at w̃_{s-1}
        v.copy_from_slice(&full_grad);
        tr.charge(n);
        match cfg.variant {
            Variant::Restart => {
                for (di, vi) in d.iter_mut().zip(&v) {
                    *di = -vi;
                }
            }
            _ => {
                for (di, hi) in d.iter_mut().zip(&h) {
                    *di = -hi;
                }
            }
        }
        guard(&mut d, &v, &mut tr);

        // k = 0
        let (eta, searched) = match cfg.variant {
            Variant::Switching { eta_f, .. } => (eta_f, false),
            _ => {
                let batch = sampler.draw(&mut rng);
                let phi0 = obj.batch_value_grad(&w, &batch, &mut g_cur);
                tr.charge(b);
                let out = searched_step(obj, &batch, &w, &d, &v, &g_cur, phi0, cfg, &mut tr)?;
                (out.eta, true)
            }
        };
        observe(&StepEvent { epoch, k: 0, v: &v, d: &d, eta, searched });
        if let Variant::Switching { .. } = cfg.variant {
            v_lag.copy_from_slice(&v);
            d_lag.copy_from_slice(&d);
        }
        w_prev.copy_from_slice(&w);
        step(&mut w, &d, eta, reg, cfg.gamma, &mut y);
        if pick == 1 {
            w_out.copy_from_slice(&w);
        }
        std::mem::swap(&mut d, &mut d_prev);

        for k in 1..cfg.m {
            let batch = sampler.draw(&mut rng);
            let phi0 = obj.batch_value_grad(&w, &batch, &mut g_cur);
            obj.batch_value_grad(&w_prev, &batch, &mut g_prev);
            tr.charge(2 * b);
            v_prev.copy_from_slice(&v);
            sarah_in_place(&mut v, &g_cur, &g_prev);
            tr.note_ratio(norm_sq(&v), norm_sq(&v_prev));

            let (eta, searched) = match cfg.variant {
                Variant::Standard | Variant::Restart => {
                    let beta = cfg.beta.evaluate(&v, &v_prev);
                    combine(&mut d, &v, beta, &d_prev);
                    guard(&mut d, &v, &mut tr);
                    (searched_step(obj, &batch, &w, &d, &v, &g_cur, phi0, cfg, &mut tr)?.eta, true)
                }
                Variant::Switching { t, eta_f } => {
                    if k % t == 0 {
                        let beta = cfg.beta.evaluate(&v, &v_lag);
                        combine(&mut d, &v, beta, &d_lag);
                        guard(&mut d, &v, &mut tr);
                        v_lag.copy_from_slice(&v);
                        d_lag.copy_from_slice(&d);
                    } else {
                        for (di, vi) in d.iter_mut().zip(&v) {
                            *di = -vi;
                        }
                    }
                    if (k + 1) % t == 0 && k + 1 < cfg.m {
                        let eta = switching_search(obj, &batch, &w, &d, &v, &g_cur, &v_lag, &d_lag, eta_f, cfg, &mut tr)?;
                        (eta, true)
                    } else {
                        (eta_f, false)
                    }
                }
            };
            observe(&StepEvent { epoch, k, v: &v, d: &d, eta, searched });

            if k == cfg.m - 1 && cfg.track_deviation {
                let mut g_full = vec![0.0; dim];
                obj.full_value_grad(&w, &mut g_full);
                tr.note_deviation(dist_sq(&v, &g_full));
            }

            w_prev.copy_from_slice(&w);
            step(&mut w, &d, eta, reg, cfg.gamma, &mut y);
            if pick == k + 1 {
                w_out.copy_from_slice(&w);
            }
            std::mem::swap(&mut d, &mut d_prev);
        }

        // h = v_{m-1}
        if cfg.variant != Variant::Restart {
            h.copy_from_slice(&v);
        }
        if cfg.output == OutputMode::Uniform {
            w.copy_from_slice(&w_out);
        }
        full_grad = tr.record(epoch, &w)?;
        if tr.budget_exhausted() {
            break;
        }
    }
    Ok(tr.finish(w))
}

pub fn run_acc_prox_cg_sarah<O: FiniteSum + ?Sized>(
    cfg: &AccConfig,
    obj: &O,
    reg: &Regularizer,
    w0: &[f64],
) -> Result<crate::optimizers::RunTrace> {
    let cfg = AccConfig { variant: Variant::Standard, ..cfg.clone() };
    run_acc(&cfg, obj, reg, w0)
}

pub fn run_acc_prox_cg_sarah_rs<O: FiniteSum + ?Sized>(
    cfg: &AccConfig,
    obj: &O,
    reg: &Regularizer,
    w0: &[f64],
) -> Result<crate::optimizers::RunTrace> {
    let cfg = AccConfig { variant: Variant::Restart, ..cfg.clone() };
    run_acc(&cfg, obj, reg, w0)
}

/// The switching variant; `cfg.variant` must carry `t` and `eta_f`.
pub fn run_acc_prox_cg_sarah_st<O: FiniteSum + ?Sized>(
    cfg: &AccConfig,
    obj: &O,
    reg: &Regularizer,
    w0: &[f64],
) -> Result<crate::optimizers::RunTrace> {
    if !matches!(cfg.variant, Variant::Switching { .. }) {
        return Err(crate::Error::invalid("switching variant needs t and eta_f"));
    }
    run_acc(cfg, obj, reg, w0)
}

/// `d ← -v + β·d_ref`
fn combine(d: &mut [f64], v: &[f64], beta: f64, d_ref: &[f64]) {
    crate::directions::direction_into(v, beta, d_ref, d);
}

/// Ascent guard: `⟨v, d⟩ ≥ 0` resets `d` to `-v`.
fn guard<O: FiniteSum + ?Sized>(d: &mut [f64], v: &[f64], tr: &mut Tracker<'_, O>) {
    if dot(v, d) >= 0.0 && norm_sq(v) > 0.0 {
        for (di, vi) in d.iter_mut().zip(v) {
            *di = -vi;
        }
        tr.trace.direction_resets += 1;
    }
}

/// `y = prox(w + ηd)`, `w ← (1-γ)w + γy`
fn step(w: &mut [f64], d: &[f64], eta: f64, reg: &Regularizer, gamma: f64, y: &mut [f64]) {
    prox_step_into(w, d, eta, reg, y);
    momentum_in_place(w, y, gamma);
}

#[allow(clippy::too_many_arguments)]
fn searched_step<O: FiniteSum + ?Sized>(
    obj: &O,
    batch: &[usize],
    w: &[f64],
    d: &[f64],
    v: &[f64],
    g_base: &[f64],
    phi0: f64,
    cfg: &AccConfig,
    tr: &mut Tracker<'_, O>,
) -> Result<SearchOutcome> {
    let curv_ref = dot(v, d);
    if !(curv_ref < 0.0) {
        // v = 0: nothing to search along
        return Ok(SearchOutcome {
            eta: cfg.wolfe.eta2,
            eta_tilde: cfg.wolfe.eta2,
            satisfied_armijo: true,
            satisfied_curvature: true,
            trials: 0,
            fallback_used: false,
            capped_early: false,
        });
    }
    let mut line = BatchLine::new(obj, batch, w, d, v, g_base);
    let slope0 = line.slope0();
    let out = wolfe_search(|eta| line.trial(eta), phi0, slope0, curv_ref, &cfg.wolfe)?;
    tr.ls_calls += 1;
    tr.charge(out.trials * batch.len());
    if out.fallback_used {
        tr.fallbacks += 1;
    }
    tr.note_step(out.eta);
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn switching_search<O: FiniteSum + ?Sized>(
    obj: &O,
    batch: &[usize],
    w: &[f64],
    d: &[f64],
    v: &[f64],
    g_base: &[f64],
    v_lag: &[f64],
    d_lag: &[f64],
    eta_f: f64,
    cfg: &AccConfig,
    tr: &mut Tracker<'_, O>,
) -> Result<f64> {
    tr.ls_calls += 1;
    let curv_ref = dot(v_lag, d_lag);
    if !(curv_ref < 0.0) {
        tr.fallbacks += 1;
        return Ok(eta_f);
    }
    let mut line = BatchLine::new(obj, batch, w, d, v, g_base).with_reference(d_lag);
    let psi0 = line.psi0();
    let out = curvature_only_search(|eta| line.trial(eta).psi, psi0, curv_ref, &cfg.wolfe)?;
    tr.charge(out.trials * batch.len());
    if out.fallback_used {
        tr.fallbacks += 1;
    }
    tr.note_step(out.eta);
    Ok(out.eta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::directions::BetaFormula;
    use crate::linesearch::WolfeParams;

    /// `f_i(w) = ½(a_i·w - y_i)²` on dense rows.
    struct LeastSquares {
        a: Vec<Vec<f64>>,
        y: Vec<f64>,
    }

    impl FiniteSum for LeastSquares {
        fn num_examples(&self) -> usize {
            self.a.len()
        }
        fn dim(&self) -> usize {
            self.a[0].len()
        }
        fn batch_value_grad(&self, w: &[f64], batch: &[usize], grad: &mut [f64]) -> f64 {
            grad.fill(0.0);
            let s = 1.0 / batch.len() as f64;
            let mut f = 0.0;
            for &i in batch {
                let r = dot(&self.a[i], w) - self.y[i];
                f += 0.5 * r * r;
                for (g, aij) in grad.iter_mut().zip(&self.a[i]) {
                    *g += s * r * aij;
                }
            }
            f * s
        }
        fn batch_value(&self, w: &[f64], batch: &[usize]) -> f64 {
            let mut g = vec![0.0; w.len()];
            self.batch_value_grad(w, batch, &mut g)
        }
    }

    fn problem() -> LeastSquares {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a: Vec<Vec<f64>> = (0..30).map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let y = (0..30).map(|_| rng.random_range(-1.0..1.0)).collect();
        LeastSquares { a, y }
    }

    fn config(variant: Variant) -> AccConfig {
        AccConfig {
            variant,
            epochs: 4,
            m: 6,
            b: 5,
            gamma: 0.8,
            beta: BetaFormula::afr(0.8, 0.9),
            wolfe: WolfeParams::default(),
            seed: 3,
            metric_eta: 0.5,
            output: OutputMode::Last,
            max_passes: None,
            track_deviation: true,
        }
    }

    #[test]
    fn deterministic_and_decreasing() {
        let p = problem();
        let reg = Regularizer::l1(1e-3).unwrap();
        let cfg = config(Variant::Standard);
        let a = run_acc(&cfg, &p, &reg, &[0.0; 4]).unwrap();
        let b = run_acc(&cfg, &p, &reg, &[0.0; 4]).unwrap();
        assert_eq!(a.records.len(), 5);
        for (x, y) in a.records.iter().zip(&b.records) {
            assert_eq!(x.objective.to_bits(), y.objective.to_bits());
            assert_eq!(x.effective_passes, y.effective_passes);
        }
        assert!(a.final_record().objective < a.records[0].objective);
        assert!(a.deviation_sq_max.is_some());
    }

    #[test]
    fn single_epoch_standard_equals_restart() {
        let p = problem();
        let reg = Regularizer::none();
        let mut cfg = config(Variant::Standard);
        cfg.epochs = 1;
        let a = run_acc(&cfg, &p, &reg, &[0.0; 4]).unwrap();
        cfg.variant = Variant::Restart;
        let b = run_acc(&cfg, &p, &reg, &[0.0; 4]).unwrap();
        assert_eq!(a.w_final, b.w_final);
    }

    #[test]
    fn pass_accounting() {
        let p = problem();
        let reg = Regularizer::none();
        let cfg = config(Variant::Standard);
        let tr = run_acc(&cfg, &p, &reg, &[0.0; 4]).unwrap();
        assert_eq!(tr.records[0].effective_passes, 0.0);
        for pair in tr.records.windows(2) {
            let dp = pair[1].effective_passes - pair[0].effective_passes;
            // 1 full gradient + first-step base gradient + 2b(m-1) + searched trials
            let fixed = 1.0 + (5.0 + 2.0 * 5.0 * 5.0) / 30.0;
            let extra = (dp - fixed) * 30.0 / 5.0;
            assert!(extra >= 6.0 - 1e-9, "at least one trial per search");
            assert!((extra - extra.round()).abs() < 1e-9);
        }
    }

    #[test]
    fn switching_counts_searches() {
        let p = problem();
        let reg = Regularizer::none();
        let mut cfg = config(Variant::Switching { t: 2, eta_f: 0.3 });
        cfg.m = 7;
        let tr = run_acc(&cfg, &p, &reg, &[0.0; 4]).unwrap();
        assert_eq!(tr.final_record().ls_calls, 4 * 3);
    }

    #[test]
    fn uniform_output_runs() {
        let p = problem();
        let mut cfg = config(Variant::Restart);
        cfg.output = OutputMode::Uniform;
        let tr = run_acc(&cfg, &p, &Regularizer::none(), &[0.0; 4]).unwrap();
        assert_eq!(tr.records.len(), 5);
    }

    #[test]
    fn rejects_bad_config() {
        let p = problem();
        let mut cfg = config(Variant::Switching { t: 6, eta_f: 0.1 });
        assert!(run_acc(&cfg, &p, &Regularizer::none(), &[0.0; 4]).is_err());
        cfg.variant = Variant::Standard;
        cfg.b = 31;
        assert!(run_acc(&cfg, &p, &Regularizer::none(), &[0.0; 4]).is_err());
        cfg.b = 5;
        assert!(run_acc(&cfg, &p, &Regularizer::none(), &[0.0; 3]).is_err());
    }
}
