//! Hierarchical generation and the study of how `z` varies restorations.

use ndarray::{Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::degradation::DegradationSchedule;
use crate::error::{invalid, Error, Result};
use crate::neural::{Generator, StepBatch};
use crate::numerics::RngState;

/// How the loop re-enters step `k − 1` after each restoration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingMode {
    /// `y_{k−1} ∼ N(A_{k−1} x̂, Σ_{k−1})`.
    #[default]
    Forward,
    /// `y_{k−1}` from the Gaussian posterior given `y_k` and `x̂`; needs a
    /// decomposable schedule.
    Posterior,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub samples: Array2<f64>,
    /// Generator evaluations per sample.
    pub nfe: usize,
    pub seed: u64,
}

impl SampleBatch {
    pub fn count(&self) -> usize {
        self.samples.nrows()
    }
}

/// Draw `n` samples by restoring from `p_T` one step at a time.
pub fn generate(generator: &Generator, schedule: &DegradationSchedule, n: usize, rng: &mut RngState) -> Result<SampleBatch> {
    generate_with(generator, schedule, n, SamplingMode::Forward, rng)
}

pub fn generate_with(
    generator: &Generator,
    schedule: &DegradationSchedule,
    n: usize,
    mode: SamplingMode,
    rng: &mut RngState,
) -> Result<SampleBatch> {
    let t = schedule.total_steps();
    if generator.config.total_steps != t || generator.config.data_dim != schedule.data_dim() {
        return Err(Error::InvalidState(
            "generator was trained for a different schedule".into(),
        ));
    }
    if mode == SamplingMode::Posterior && !schedule.is_fully_decomposable() {
        return Err(Error::UnsupportedSchedule(
            "posterior sampling needs every step to decompose".into(),
        ));
    }
    let seed = rng.seed();
    let mut y = schedule.latent_sample(n, rng);
    let mut x_hat = Array2::zeros((n, schedule.data_dim()));
    let mut nfe = 0;
    for k in (1..=t).rev() {
        let z = generator.draw_z(n, rng);
        x_hat = generator.apply(&StepBatch::single(k, y.clone()), z.as_ref().map(|z| z.view()), schedule)?;
        nfe += 1;
        y = match mode {
            SamplingMode::Forward => schedule.forward_sample(k - 1, x_hat.view(), rng)?,
            SamplingMode::Posterior => schedule.posterior_sample(k, y.view(), x_hat.view(), rng)?,
        };
    }
    if x_hat.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalFailure("generated samples are not finite".into()));
    }
    Ok(SampleBatch {
        samples: x_hat,
        nfe,
        seed,
    })
}

/// Sampling with an MMSE network, which takes no `z`.
pub fn generate_mmse(
    generator: &Generator,
    schedule: &DegradationSchedule,
    n: usize,
    rng: &mut RngState,
) -> Result<SampleBatch> {
    if generator.config.z_dim != 0 {
        return invalid("an MMSE generator takes no z");
    }
    generate(generator, schedule, n, rng)
}

/// One restoration `G(y_k, k, z)` for each row of `x`, with `y_k` drawn from
/// the forward process.
pub fn restore_batch(
    generator: &Generator,
    schedule: &DegradationSchedule,
    x: &Array2<f64>,
    k: usize,
    rng: &mut RngState,
) -> Result<Array2<f64>> {
    if k == 0 || k > schedule.total_steps() {
        return invalid(format!("restoration step {k} outside 1..={}", schedule.total_steps()));
    }
    let y = schedule.forward_sample(k, x.view(), rng)?;
    let z = generator.draw_z(x.nrows(), rng);
    generator.apply(&StepBatch::single(k, y), z.as_ref().map(|z| z.view()), schedule)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variants {
    pub k: usize,
    pub degraded: Array2<f64>,
    pub restorations: Array2<f64>,
    /// Mean distance between distinct restorations; zero for a single one.
    pub spread: f64,
}

/// Mean over ordered pairs `i ≠ j` of `‖a_i − a_j‖`.
pub fn pairwise_spread(rows: &Array2<f64>) -> f64 {
    let n = rows.nrows();
    if n < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let d = &rows.row(i) - &rows.row(j);
            total += d.dot(&d).sqrt();
        }
    }
    total * 2.0 / (n * (n - 1)) as f64
}

/// Degrade one data point to step `k` once, then restore it with
/// `z_count` different draws of `z`.
pub fn restore_variants(
    generator: &Generator,
    schedule: &DegradationSchedule,
    x: ArrayView1<f64>,
    k: usize,
    z_count: usize,
    rng: &mut RngState,
) -> Result<Variants> {
    if k == 0 || k > schedule.total_steps() {
        return invalid(format!("restoration step {k} outside 1..={}", schedule.total_steps()));
    }
    if z_count == 0 {
        return invalid("z_count must be at least 1");
    }
    let y = schedule.forward_sample(k, x.insert_axis(Axis(0)), rng)?;
    let tiled = Array2::from_shape_fn((z_count, y.ncols()), |(_, j)| y[[0, j]]);
    let z = generator.draw_z(z_count, rng);
    let restorations = generator.apply(&StepBatch::single(k, tiled), z.as_ref().map(|z| z.view()), schedule)?;
    let spread = pairwise_spread(&restorations);
    Ok(Variants {
        k,
        degraded: y,
        restorations,
        spread,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::degradation::{DataShape, ScheduleDescriptor, ScheduleKind};
    use crate::neural::{GeneratorConfig, Mlp, OutputActivation, StepEncoding, ZMode};
    use ndarray::array;

    fn constant_generator(schedule: &DegradationSchedule, c: &[f64], z_dim: usize) -> Generator {
        let config = GeneratorConfig {
            data_dim: schedule.data_dim(),
            z_dim,
            z_mode: ZMode::Random,
            hidden: 4,
            depth: 2,
            step_encoding: StepEncoding::Scalar,
            total_steps: schedule.total_steps(),
        };
        let mut net = Mlp::zeros(&[config.input_dim(), 4, config.data_dim], OutputActivation::None).unwrap();
        let n = net.num_params();
        net.params_mut()[n - c.len()..].copy_from_slice(c);
        Generator::from_net(config, net).unwrap()
    }

    #[test]
    fn constant_generator_gives_constant_samples() {
        for kind in [ScheduleKind::Denoise, ScheduleKind::SuperRes] {
            let s = ScheduleDescriptor::new(kind, 3, DataShape::new(4, 4, 1)).build().unwrap();
            let c: Vec<f64> = (0..16).map(|i| i as f64 / 10.0).collect();
            let g = constant_generator(&s, &c, 2);
            let out = generate(&g, &s, 5, &mut RngState::new(1)).unwrap();
            assert_eq!(out.nfe, 3);
            for row in out.samples.outer_iter() {
                assert_eq!(row.to_vec(), c);
            }
        }
    }

    #[test]
    fn deterministic_and_schedule_checked() {
        let s = ScheduleDescriptor::new(ScheduleKind::Denoise, 4, DataShape::vector(2)).build().unwrap();
        let g = Generator::new(
            GeneratorConfig {
                data_dim: 2,
                z_dim: 2,
                z_mode: ZMode::Random,
                hidden: 8,
                depth: 3,
                step_encoding: StepEncoding::Scalar,
                total_steps: 4,
            },
            &mut RngState::new(2),
        )
        .unwrap();
        let a = generate(&g, &s, 20, &mut RngState::new(3)).unwrap();
        let b = generate(&g, &s, 20, &mut RngState::new(3)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.count(), 20);
        let other = ScheduleDescriptor::new(ScheduleKind::Denoise, 5, DataShape::vector(2)).build().unwrap();
        assert!(matches!(generate(&g, &other, 2, &mut RngState::new(3)), Err(Error::InvalidState(_))));
        assert!(generate_mmse(&g, &s, 2, &mut RngState::new(3)).is_err());
        let post = generate_with(&g, &s, 4, SamplingMode::Posterior, &mut RngState::new(3)).unwrap();
        assert_eq!(post.nfe, 4);
    }

    #[test]
    fn variants_spread() {
        let s = ScheduleDescriptor::new(ScheduleKind::Denoise, 4, DataShape::vector(2)).build().unwrap();
        let g = constant_generator(&s, &[1.0, 2.0], 2);
        let v = restore_variants(&g, &s, array![0.5, 0.5].view(), 2, 1, &mut RngState::new(4)).unwrap();
        assert_eq!(v.spread, 0.0);
        let v = restore_variants(&g, &s, array![0.5, 0.5].view(), 4, 6, &mut RngState::new(4)).unwrap();
        assert_eq!(v.restorations.nrows(), 6);
        assert_eq!(v.spread, 0.0);
        assert!(restore_variants(&g, &s, array![0.5, 0.5].view(), 0, 2, &mut RngState::new(4)).is_err());
        let pts = array![[0.0, 0.0], [3.0, 4.0]];
        assert_eq!(pairwise_spread(&pts), 5.0);
    }
}
