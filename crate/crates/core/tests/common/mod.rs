#![allow(dead_code)]

use rgm_core::degradation::{DataShape, ScheduleDescriptor, ScheduleKind};
use rgm_core::evaldata::{DatasetSpec, Gmm8Spec};
use rgm_core::neural::Generator;
use rgm_core::training::{Algorithm, GeneratorSettings, TrainConfig};
use rgm_core::PriorConfig;

/// 2D 8-Gaussian run on the denoising schedule with `T = 4`.
pub fn gmm_config(algorithm: Algorithm, prior: PriorConfig, batch_size: usize, iterations: u64, seed: u64) -> TrainConfig {
    TrainConfig {
        schedule: ScheduleDescriptor::new(ScheduleKind::Denoise, 4, DataShape::vector(2)),
        algorithm,
        prior,
        lambda: 1.0,
        lr_g: 1e-4,
        lr_d: 1e-4,
        batch_size,
        iterations,
        seed,
        r1_gamma: 0.05,
        adam_beta1: 0.9,
        adam_beta2: 0.999,
        log_every: 1000,
        eval_samples: 0,
        generator: GeneratorSettings::default(),
        dataset: DatasetSpec::Gmm8 {
            spec: Gmm8Spec::default(),
            size: 20_000,
            seed: 11,
        },
    }
}

pub fn with_params(generator: &Generator, params: &[f64]) -> Generator {
    let mut g = generator.clone();
    g.net.params_mut().copy_from_slice(params);
    g
}

/// `‖a − b‖ / max(‖a‖, ‖b‖, floor)`.
pub fn rel_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / na.max(nb).max(floor)
}
