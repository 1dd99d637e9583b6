mod common;

use common::{gmm_config, rel_err, with_params};
use rgm_core::degradation::{DataShape, ScheduleDescriptor, ScheduleKind};
use rgm_core::evaldata::{DatasetSpec, ToyImageSpec};
use rgm_core::neural::Checkpoint;
use rgm_core::numerics::finite_diff_grad;
use rgm_core::priors::{DswdConfig, MmdConfig};
use rgm_core::training::{train, Algorithm};
use rgm_core::{PriorConfig, TrainConfig, Trainer};

fn fd_check(config: TrainConfig, warmup: usize) {
    let mut trainer = Trainer::new(config).unwrap();
    for _ in 0..warmup {
        trainer.step().unwrap();
    }
    let draws = trainer.draw().unwrap();
    let g0 = trainer.generator.clone();
    let (_, analytic) = trainer.generator_objective(&g0, &draws).unwrap();
    let numeric = finite_diff_grad(
        |p| trainer.generator_objective(&with_params(&g0, p), &draws).unwrap().0.loss_g,
        g0.net.params(),
        1e-6,
    )
    .unwrap();
    let err = rel_err(&analytic, &numeric, 1e-8);
    assert!(err < 1e-5, "relative gradient error {err}");
}

#[test]
fn relaxed_kld_gradient_matches_finite_differences() {
    fd_check(gmm_config(Algorithm::Relaxed, PriorConfig::default(), 24, 0, 1), 2);
}

#[test]
fn posterior_kld_gradient_matches_finite_differences() {
    fd_check(gmm_config(Algorithm::Posterior, PriorConfig::default(), 24, 0, 2), 2);
}

#[test]
fn direct_mmd_gradient_matches_finite_differences() {
    fd_check(gmm_config(Algorithm::Direct, PriorConfig::Mmd(MmdConfig::default()), 24, 0, 3), 0);
}

#[test]
fn relaxed_dswd_gradient_matches_finite_differences() {
    fd_check(gmm_config(Algorithm::Relaxed, PriorConfig::Dswd(DswdConfig::default()), 24, 0, 4), 1);
}

#[test]
fn mmse_gradient_matches_finite_differences() {
    fd_check(gmm_config(Algorithm::Mmse, PriorConfig::default(), 24, 0, 5), 1);
}

#[test]
fn super_resolution_schedule_gradient_matches_finite_differences() {
    let mut cfg = gmm_config(Algorithm::Relaxed, PriorConfig::Mmd(MmdConfig::default()), 12, 0, 6);
    cfg.schedule = ScheduleDescriptor::new(ScheduleKind::SuperRes, 3, DataShape::new(8, 8, 1));
    cfg.generator.hidden = 6;
    cfg.dataset = DatasetSpec::Toy {
        spec: ToyImageSpec {
            size: 8,
            ..ToyImageSpec::default()
        },
        count: 40,
    };
    fd_check(cfg, 0);
}

#[test]
fn infinite_lambda_leaves_only_the_prior() {
    let mut cfg = gmm_config(Algorithm::Relaxed, PriorConfig::default(), 32, 0, 7);
    cfg.lambda = f64::INFINITY;
    let mut trainer = Trainer::new(cfg.clone()).unwrap();
    let draws = trainer.draw().unwrap();
    let (l, g_inf) = trainer.generator_objective(&trainer.generator, &draws).unwrap();
    assert_eq!(l.loss_g, l.prior.unwrap());
    assert!(l.fidelity > 0.0, "fidelity is still reported");

    let mut finite = trainer.clone();
    finite.config.lambda = 1.0;
    let (l1, g1) = finite.generator_objective(&finite.generator, &draws).unwrap();
    assert!((l1.loss_g - (l1.prior.unwrap() + l1.fidelity)).abs() < 1e-12);
    assert!(rel_err(&g_inf, &g1, 1e-12) > 1e-6, "fidelity must change the gradient at finite lambda");
}

#[test]
fn zero_iterations_checkpoint_holds_initial_parameters() {
    let cfg = gmm_config(Algorithm::Relaxed, PriorConfig::default(), 16, 0, 8);
    let fresh = Trainer::new(cfg.clone()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (record, trainer) = train(cfg, Some(dir.path())).unwrap();
    assert_eq!(record.final_iteration, 0);
    assert_eq!(trainer.generator, fresh.generator);
    let ckpt = rgm_core::neural::load_checkpoint(dir.path().join("checkpoint.json")).unwrap();
    assert_eq!(ckpt.generator, fresh.generator);
    assert!(dir.path().join("metrics.csv").exists());
}

#[test]
fn resumed_run_matches_an_uninterrupted_one() {
    for prior in [PriorConfig::default(), PriorConfig::Dswd(DswdConfig::default())] {
        let mut cfg = gmm_config(Algorithm::Relaxed, prior, 32, 20, 9);
        cfg.log_every = 5;
        let (_, straight) = train(cfg.clone(), None).unwrap();

        let mut first = cfg.clone();
        first.iterations = 11;
        let (_, half) = train(first, None).unwrap();
        let text = half.checkpoint().to_json().unwrap();
        let ckpt = Checkpoint::from_json(&text).unwrap();
        let mut resumed = Trainer::resume(cfg, &ckpt).unwrap();
        resumed.run(None).unwrap();

        assert_eq!(resumed.iteration, 20);
        assert_eq!(resumed.generator, straight.generator);
        assert_eq!(resumed.prior, straight.prior);
    }
}

#[test]
fn checkpoint_json_round_trip_is_exact() {
    let cfg = gmm_config(Algorithm::Posterior, PriorConfig::default(), 32, 3, 10);
    let (_, trainer) = train(cfg, None).unwrap();
    let ckpt = trainer.checkpoint();
    let back = Checkpoint::from_json(&ckpt.to_json().unwrap()).unwrap();
    assert_eq!(back, ckpt);
}

#[test]
fn resume_rejects_a_different_schedule() {
    let cfg = gmm_config(Algorithm::Relaxed, PriorConfig::default(), 16, 1, 11);
    let (_, trainer) = train(cfg.clone(), None).unwrap();
    let mut other = cfg;
    other.schedule.steps = 5;
    assert!(Trainer::resume(other, &trainer.checkpoint()).is_err());
}

#[test]
fn runs_with_the_same_seed_are_bit_identical() {
    let mut cfg = gmm_config(Algorithm::Relaxed, PriorConfig::Mmd(MmdConfig::default()), 32, 10, 12);
    cfg.log_every = 5;
    cfg.eval_samples = 50;
    let (a, _) = train(cfg.clone(), None).unwrap();
    let (b, _) = train(cfg.clone(), None).unwrap();
    assert_eq!(a.entries, b.entries);
    cfg.seed = 13;
    let (c, _) = train(cfg, None).unwrap();
    assert_ne!(a.entries, c.entries);
}

#[test]
fn relaxed_and_posterior_objectives_both_run_and_stay_finite() {
    for alg in [Algorithm::Relaxed, Algorithm::Posterior] {
        let mut cfg = gmm_config(alg, PriorConfig::default(), 64, 40, 14);
        cfg.log_every = 20;
        let (record, _) = train(cfg, None).unwrap();
        assert!(record.abort.is_none());
        assert!(record.entries.iter().all(|e| e.loss_g.is_finite() && e.fidelity.is_finite()));
    }
}
