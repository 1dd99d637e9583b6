use ndarray::Array2;
use proptest::prelude::*;
use rgm_core::degradation::DataShape;
use rgm_core::evaldata::{make_toy_images, ToyImageSpec};
use rgm_core::inverse::{make_colorize, make_denoise, make_sr, prox_fidelity, prox_fidelity_dense, InverseTask};
use rgm_core::RngState;

fn task(kind: u8, channels: usize, sigma: f64, seed: u64) -> InverseTask {
    let spec = ToyImageSpec {
        size: 8,
        channels,
        seed,
        ..ToyImageSpec::default()
    };
    let shape = spec.shape();
    let truth = make_toy_images(&spec, 3).unwrap();
    let mut rng = RngState::new(seed ^ 0x55);
    match kind % 3 {
        0 => make_denoise(&truth, shape, sigma.max(1e-3), &mut rng),
        1 => make_sr(&truth, shape, if seed % 2 == 0 { 2 } else { 4 }, sigma, &mut rng),
        _ => make_colorize(&truth, DataShape::new(8, 8, channels.max(2)), sigma, &mut rng),
    }
    .unwrap()
}

fn norm(a: &Array2<f64>) -> f64 {
    a.mapv(|v| v * v).sum().sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 40, ..ProptestConfig::default() })]

    #[test]
    fn prox_is_non_expansive(kind in 0u8..3, sigma in 0.0f64..0.5, lambda in 1e-3f64..50.0, seed in any::<u64>()) {
        let channels = if kind % 3 == 2 { 3 } else { 1 };
        let t = task(kind, channels, sigma, seed);
        let mut rng = RngState::new(seed.wrapping_add(1));
        let dim = t.shape().dim();
        let u = rng.normal_matrix(3, dim);
        let v = rng.normal_matrix(3, dim);
        let pu = prox_fidelity(u.view(), &t, lambda).unwrap();
        let pv = prox_fidelity(v.view(), &t, lambda).unwrap();
        prop_assert!(norm(&(&pu - &pv)) <= norm(&(&u - &v)) * (1.0 + 1e-12));
    }

    #[test]
    fn structured_prox_matches_dense_svd_path(kind in 0u8..3, sigma in 0.0f64..0.5, lambda in 1e-3f64..50.0, seed in any::<u64>()) {
        let channels = if kind % 3 == 2 { 3 } else { 1 };
        let t = task(kind, channels, sigma, seed);
        let v = RngState::new(seed.wrapping_add(7)).normal_matrix(3, t.shape().dim());
        let fast = prox_fidelity(v.view(), &t, lambda).unwrap();
        let a = t.op.to_dense().unwrap();
        for i in 0..v.nrows() {
            let dense = prox_fidelity_dense(v.row(i), a.view(), t.observation.row(i), t.fidelity_sigma(), lambda).unwrap();
            prop_assert!((&fast.row(i) - &dense).iter().all(|d| d.abs() < 1e-9));
        }
    }
}

#[test]
fn prox_with_zero_weight_is_identity() {
    let t = task(1, 1, 0.1, 4);
    let v = RngState::new(1).normal_matrix(3, t.shape().dim());
    assert_eq!(prox_fidelity(v.view(), &t, 0.0).unwrap(), v);
}
