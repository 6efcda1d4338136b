mod common;

use common::*;
use metanc::dsp::{FirFilter, NormalStream};
use metanc::meta::{meta_gradients, meta_train, phase_a, phase_b, MetaConfig, MetaInit, Task, TaskDraw};
use metanc::paths::SurrogateFamily;
use metanc::Error;

fn small_cfg() -> MetaConfig {
    MetaConfig {
        l_w: 12,
        l_s: 8,
        t_a: 50,
        t_b: 40,
        n_s: 30,
        n_w: 30,
        segment_len: 200,
        track_len: 4000,
        epochs: 40,
        ..MetaConfig::default()
    }
}

#[test]
fn gradients_match_direct_sums() {
    let cfg = small_cfg();
    let mut rng = NormalStream::new(3);
    for _ in 0..50 {
        let secondary = FirFilter::new(rng.take(cfg.l_s));
        let w = rng.take(cfg.l_w);
        let s_hat = rng.take(cfg.l_s);
        let x = rng.take(cfg.validation_len() + 5);
        let d = rng.take(x.len());
        let exc = rng.take(cfg.validation_len());
        let draw = TaskDraw {
            secondary: &secondary,
            train_x: &[],
            train_d: &[],
            val_x: &x,
            val_d: &d,
            train_aux: Vec::new(),
            val_aux: exc.clone(),
        };
        let got = meta_gradients(&FirFilter::new(w.clone()), &FirFilter::new(s_hat.clone()), &draw, &cfg).unwrap();
        let (phi, psi) = naive_meta_gradients(
            &w,
            &s_hat,
            secondary.coeffs(),
            &exc,
            &x,
            &d,
            cfg.n_s,
            cfg.n_w,
            cfg.lambda_s,
            cfg.lambda_w,
        );
        for (g, e) in got.delta_phi.iter().zip(&phi).chain(got.delta_psi.iter().zip(&psi)) {
            assert!(rel_err(*g, *e) < 1e-10, "{g} vs {e}");
        }
    }
}

#[test]
fn exact_model_has_zero_identification_gradient() {
    let cfg = small_cfg();
    let mut rng = NormalStream::new(4);
    let secondary = FirFilter::new(rng.take(cfg.l_s));
    let x = rng.take(cfg.validation_len());
    let d = vec![0.0; x.len()];
    let draw = TaskDraw {
        secondary: &secondary,
        train_x: &[],
        train_d: &[],
        val_x: &x,
        val_d: &d,
        train_aux: Vec::new(),
        val_aux: rng.take(cfg.validation_len()),
    };
    let g = meta_gradients(&FirFilter::zeros(cfg.l_w), &secondary, &draw, &cfg).unwrap();
    assert!(g.delta_psi.iter().all(|&v| v == 0.0));
    assert!(g.delta_phi.iter().all(|&v| v == 0.0));
    assert_eq!(g.val_mse, 0.0);
    assert_eq!(g.val_mse_sp, 0.0);
}

#[test]
fn first_identification_step_scales_the_regressor() {
    let cfg = MetaConfig { t_a: 1, l_s: 4, ..small_cfg() };
    let s_true = FirFilter::new(vec![1.0, 0.5, 0.0, 0.0]);
    // Regressor, newest first: [1, 0, 0, 0].
    let exc = [0.0, 0.0, 0.0, 1.0];
    let s_hat = phase_a(&FirFilter::zeros(4), &s_true, &exc, &cfg).unwrap();
    assert_eq!(s_hat.coeffs(), &[cfg.mu_s, 0.0, 0.0, 0.0]);
}

#[test]
fn control_adaptation_leaves_zero_filter_on_silence() {
    let cfg = small_cfg();
    let x = NormalStream::new(5).take(200);
    let d = vec![0.0; 200];
    let s_hat = FirFilter::new(NormalStream::new(6).take(cfg.l_s));
    let w = phase_b(&FirFilter::zeros(cfg.l_w), &s_hat, &x, &d, &cfg).unwrap();
    assert!(w.coeffs().iter().all(|&c| c == 0.0));
}

#[test]
fn short_inputs_are_contract_errors() {
    let cfg = small_cfg();
    let s = FirFilter::zeros(cfg.l_s);
    assert!(matches!(phase_a(&s, &s, &[0.0; 10], &cfg), Err(Error::Contract(_))));
    let w = FirFilter::zeros(cfg.l_w);
    assert!(matches!(phase_b(&w, &s, &[0.0; 10], &[0.0; 10], &cfg), Err(Error::Contract(_))));
}

#[test]
fn identification_diverges_loudly_with_huge_step() {
    let cfg = MetaConfig { t_a: 2000, mu_s: 10.0, ..small_cfg() };
    let s_true = FirFilter::new(NormalStream::new(7).take(cfg.l_s));
    let exc = NormalStream::new(8).take(2000 + cfg.l_s);
    assert!(matches!(
        phase_a(&FirFilter::zeros(cfg.l_s), &s_true, &exc, &cfg),
        Err(Error::Diverged { .. })
    ));
}

#[test]
fn training_is_deterministic() {
    let cfg = small_cfg();
    let pairs = stock_pairs(1, 2);
    let a = meta_train(&pairs, &cfg).unwrap();
    let b = meta_train(&pairs, &cfg).unwrap();
    assert_eq!(a.init, b.init);
    assert_eq!(a.log, b.log);
    assert_eq!(a.log.len(), cfg.epochs);
    let c = meta_train(&pairs, &MetaConfig { seed: 99, ..cfg }).unwrap();
    assert_ne!(a.init, c.init);
}

#[test]
fn training_moves_psi_toward_the_secondary_paths() {
    let cfg = MetaConfig { epochs: 400, alpha_s: 1e-3, ..small_cfg() };
    let pairs = stock_pairs(1, 3);
    let trained = meta_train(&pairs, &cfg).unwrap().init;
    let mean_dist = |psi: &FirFilter| {
        pairs
            .iter()
            .map(|p| psi.distance(&p.secondary.resized(cfg.l_s).ir))
            .sum::<f64>()
            / pairs.len() as f64
    };
    assert!(mean_dist(&trained.psi) < mean_dist(&FirFilter::zeros(cfg.l_s)));
}

#[test]
fn empty_task_list_is_rejected() {
    assert!(matches!(meta_train(&[], &small_cfg()), Err(Error::Contract(_))));
}

#[test]
fn invalid_config_is_rejected() {
    let cfg = MetaConfig { segment_len: 10, ..small_cfg() };
    assert!(matches!(meta_train(&stock_pairs(1, 1), &cfg), Err(Error::Config(_))));
}

#[test]
fn init_text_round_trip_is_exact() {
    let cfg = small_cfg();
    let init = meta_train(&stock_pairs(1, 2), &cfg).unwrap().init;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("init.txt");
    init.save(&path).unwrap();
    assert_eq!(MetaInit::load(&path).unwrap(), init);
}

#[test]
fn corrupt_init_files_are_malformed() {
    let origin = std::path::Path::new("x.txt");
    let good = MetaInit::zeros(2, 1).to_text();
    assert!(MetaInit::from_text(&good, origin).is_ok());
    let truncated = good.lines().take(7).collect::<Vec<_>>().join("\n");
    assert!(matches!(MetaInit::from_text(&truncated, origin), Err(Error::Malformed { .. })));
    assert!(matches!(MetaInit::from_text("hello", origin), Err(Error::Malformed { .. })));
    let nan = good.replacen("0.0000000000000000e0", "NaN", 1);
    assert!(matches!(MetaInit::from_text(&nan, origin), Err(Error::NonFinite { .. })));
}

#[test]
fn task_disturbance_is_primary_filtered_reference() {
    let cfg = small_cfg();
    let pair = SurrogateFamily::stock_pair(9).unwrap();
    let task = Task::synthesize(&pair, &cfg, 1).unwrap();
    for n in [0isize, 17, 300, 3999] {
        let want = naive_conv_at(pair.primary.taps(), &task.x, n);
        assert!(rel_err(task.d[n as usize], want) < 1e-12);
    }
    assert_eq!(task.secondary.len(), cfg.l_s);
}
