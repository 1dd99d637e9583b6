//! Shared fixtures for the benchmarks.

use ndarray::Array2;
use rgm_core::degradation::{DataShape, ScheduleDescriptor, ScheduleKind};
use rgm_core::evaldata::{DatasetSpec, Gmm8Spec};
use rgm_core::training::{Algorithm, GeneratorSettings, TrainConfig};
use rgm_core::RngState;

/// The 2D benchmark configuration with a configurable batch.
pub fn gmm_config(prior: rgm_core::PriorConfig, batch_size: usize) -> TrainConfig {
    TrainConfig {
        schedule: ScheduleDescriptor::new(ScheduleKind::Denoise, 4, DataShape::vector(2)),
        algorithm: Algorithm::Relaxed,
        prior,
        lambda: 1.0,
        lr_g: 1e-4,
        lr_d: 1e-4,
        batch_size,
        iterations: 1,
        seed: 0,
        r1_gamma: 0.05,
        adam_beta1: 0.9,
        adam_beta2: 0.999,
        log_every: 1,
        eval_samples: 0,
        generator: GeneratorSettings::default(),
        dataset: DatasetSpec::Gmm8 {
            spec: Gmm8Spec::default(),
            size: 10_000,
            seed: 1,
        },
    }
}

pub fn gaussian_rows(n: usize, d: usize, seed: u64) -> Array2<f64> {
    RngState::new(seed).normal_matrix(n, d)
}
