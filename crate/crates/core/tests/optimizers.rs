mod common;

use common::*;
use proxcg_core::linesearch::WolfeParams;
use proxcg_core::optimizers::{
    preset, run_acc, run_acc_observed, run_baseline, AccConfig, Algorithm, BaselineConfig, OutputMode, Variant,
};
use proxcg_core::{BetaFormula, Error, FiniteSum, LossKind, LossObjective, Regularizer};

fn acc(variant: Variant, m: usize, b: usize) -> AccConfig {
    AccConfig {
        variant,
        epochs: 5,
        m,
        b,
        gamma: 0.7,
        beta: BetaFormula::afr(0.8, 0.9),
        wolfe: WolfeParams::default(),
        seed: 9,
        metric_eta: 0.5,
        output: OutputMode::Last,
        max_passes: None,
        track_deviation: false,
    }
}

#[test]
fn single_step_full_batch_never_increases() {
    let mut r = rng(21);
    let ls = LeastSquares::random(&mut r, 40, 5);
    for beta in [BetaFormula::Fr, BetaFormula::afr(0.8, 0.9), BetaFormula::frpr()] {
        let mut cfg = acc(Variant::Standard, 1, 40);
        cfg.epochs = 15;
        cfg.beta = beta;
        let tr = run_acc(&cfg, &ls, &Regularizer::none(), &[0.0; 5]).unwrap();
        for pair in tr.records.windows(2) {
            assert!(pair[1].objective <= pair[0].objective + 1e-12, "{beta:?}: {pair:?}");
        }
    }
}

#[test]
fn one_epoch_variants_agree() {
    let mut r = rng(22);
    let data = random_dataset(&mut r, 50, 6, 0.5);
    let obj = LossObjective::new(&data, LossKind::LogisticDifference);
    let reg = Regularizer::l1(1e-3).unwrap();
    let mut cfg = acc(Variant::Standard, 6, 5);
    cfg.epochs = 1;
    let a = run_acc(&cfg, &obj, &reg, &[0.0; 6]).unwrap();
    cfg.variant = Variant::Restart;
    let b = run_acc(&cfg, &obj, &reg, &[0.0; 6]).unwrap();
    assert_eq!(a.w_final, b.w_final);
    assert_eq!(a.final_record().objective.to_bits(), b.final_record().objective.to_bits());
}

#[test]
fn switching_searches_once_per_epoch_at_most() {
    let mut r = rng(23);
    let data = random_dataset(&mut r, 60, 5, 0.6);
    let obj = LossObjective::new(&data, LossKind::NormalizedSigmoid);
    let (m, epochs) = (8, 4);
    let mut cfg = acc(Variant::Switching { t: m - 1, eta_f: 0.5 }, m, 6);
    cfg.epochs = epochs;
    let mut per_epoch = vec![0usize; epochs + 1];
    let tr = run_acc_observed(&cfg, &obj, &Regularizer::none(), &[0.0; 5], |ev| {
        if ev.searched && ev.k > 0 {
            per_epoch[ev.epoch] += 1;
        }
    })
    .unwrap();
    assert!(per_epoch.iter().all(|&c| c <= 1), "{per_epoch:?}");
    assert!(tr.final_record().ls_calls <= epochs * ((m - 1) / (m - 1)));
}

#[test]
fn observer_sees_every_inner_step() {
    let mut r = rng(24);
    let ls = LeastSquares::random(&mut r, 20, 4);
    let cfg = acc(Variant::Standard, 5, 4);
    let mut seen = Vec::new();
    run_acc_observed(&cfg, &ls, &Regularizer::none(), &[0.0; 4], |ev| {
        assert!(ev.eta > 0.0 && ev.eta <= cfg.wolfe.eta2);
        assert_eq!(ev.v.len(), 4);
        seen.push((ev.epoch, ev.k));
    })
    .unwrap();
    let expected: Vec<(usize, usize)> = (1..=5).flat_map(|s| (0..5).map(move |k| (s, k))).collect();
    assert_eq!(seen, expected);
}

#[test]
fn uniform_output_is_reproducible() {
    let mut r = rng(25);
    let ls = LeastSquares::random(&mut r, 30, 4);
    let mut cfg = acc(Variant::Restart, 6, 5);
    cfg.output = OutputMode::Uniform;
    let a = run_acc(&cfg, &ls, &Regularizer::none(), &[0.0; 4]).unwrap();
    let b = run_acc(&cfg, &ls, &Regularizer::none(), &[0.0; 4]).unwrap();
    assert_eq!(a.w_final, b.w_final);
    cfg.seed += 1;
    let c = run_acc(&cfg, &ls, &Regularizer::none(), &[0.0; 4]).unwrap();
    assert_ne!(a.w_final, c.w_final);
}

#[test]
fn divergence_keeps_the_trace() {
    let mut r = rng(26);
    let ls = LeastSquares::random(&mut r, 30, 4);
    let mut cfg = BaselineConfig::prox_spiderboost(30, 1.0, 50);
    cfg.eta = 1e3;
    match run_baseline(&cfg, &ls, &Regularizer::none(), &[0.1; 4]) {
        Err(Error::Divergence { epoch, trace, .. }) => {
            assert!(epoch >= 1);
            // the diverged epoch is the last record
            assert_eq!(trace.records.len(), epoch + 1);
            assert_eq!(trace.algorithm, "prox-spiderboost");
        }
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn baselines_are_deterministic_and_count_passes() {
    let mut r = rng(27);
    let data = random_dataset(&mut r, 64, 6, 0.5);
    let obj = LossObjective::new(&data, LossKind::Lorenz);
    let reg = Regularizer::l1(1e-3).unwrap();
    for name in ["prox-sarah", "prox-spiderboost", "prox-svrg+"] {
        let mut alg = preset(name, 64, 4.0, 6).unwrap();
        alg.set_seed(4);
        let a = alg.run(&obj, &reg, &[0.0; 6]).unwrap();
        let b = alg.run(&obj, &reg, &[0.0; 6]).unwrap();
        assert_eq!(a.w_final, b.w_final, "{name}");
        assert_eq!(a.records.len(), 7);
        for pair in a.records.windows(2) {
            assert!(pair[1].effective_passes > pair[0].effective_passes);
            assert_eq!(pair[1].ls_calls, 0);
        }
    }
}

#[test]
fn max_passes_stops_early() {
    let mut r = rng(28);
    let data = random_dataset(&mut r, 100, 5, 0.5);
    let obj = LossObjective::new(&data, LossKind::TwoLayerNn);
    let mut alg = preset("RS-v3", 100, LossKind::TwoLayerNn.lipschitz(), 100).unwrap();
    alg.set_max_passes(Some(4.0));
    let tr = alg.run(&obj, &Regularizer::l1(1e-4).unwrap(), &[0.0; 5]).unwrap();
    let last = tr.final_record();
    assert!(last.effective_passes >= 4.0);
    assert!(tr.records[tr.records.len() - 2].effective_passes < 4.0);
    assert!(tr.records.len() < 101);
}

#[test]
fn l1_produces_sparse_iterates() {
    let mut r = rng(29);
    let data = random_dataset(&mut r, 80, 12, 0.4);
    let obj = LossObjective::new(&data, LossKind::LogisticDifference);
    let Algorithm::Acc(mut cfg) = preset("v2", 80, LossKind::LogisticDifference.lipschitz(), 20).unwrap() else {
        panic!("acc preset expected")
    };
    cfg.seed = 2;
    let weak = run_acc(&cfg, &obj, &Regularizer::l1(1e-6).unwrap(), &[0.0; 12]).unwrap();
    let strong = run_acc(&cfg, &obj, &Regularizer::l1(0.05).unwrap(), &[0.0; 12]).unwrap();
    let zeros = |w: &[f64]| w.iter().filter(|x| **x == 0.0).count();
    assert!(zeros(&strong.w_final) > zeros(&weak.w_final), "{:?}", strong.w_final);
    assert!(strong.w_final.iter().all(|x| x.is_finite()));
    assert_eq!(obj.dim(), 12);
}
