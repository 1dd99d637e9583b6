//! Adversarial prior: `g_φ(x) = log(1 − D(x)) − log D(x)` with `D = sigmoid(logit)`.

use ndarray::Array1;

use crate::degradation::DegradationSchedule;
use crate::error::{invalid, Result};
use crate::neural::{Discriminator, StepBatch};

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + eˣ)` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Batch mean of `log(1 − D) − log D`, which is exactly `−logit`.
///
/// Returns the value and the gradient with respect to each group's rows.
pub fn kld_generator_term(
    disc: &Discriminator,
    fake: &StepBatch,
    schedule: &DegradationSchedule,
) -> Result<(f64, Vec<ndarray::Array2<f64>>)> {
    let n = fake.len();
    if n == 0 {
        return invalid("kld_generator_term: empty batch");
    }
    let (logits, tape) = disc.forward(fake, schedule)?;
    let value = -logits.sum() / n as f64;
    let seed = Array1::from_elem(n, -1.0 / n as f64);
    let (_, grads) = disc.backward(&tape, &seed, fake, schedule)?;
    Ok((value, grads))
}

/// Loss minimised by the discriminator:
/// `−mean log D(real) − mean log(1 − D(fake)) + (γ/2)·mean ‖∇_y D(real)‖²`.
///
/// Returns the value and the parameter gradient.
pub fn discriminator_loss(
    disc: &Discriminator,
    real: &StepBatch,
    fake: &StepBatch,
    r1_gamma: f64,
    schedule: &DegradationSchedule,
) -> Result<(f64, Vec<f64>)> {
    if real.is_empty() || fake.is_empty() {
        return invalid("discriminator_loss: empty batch");
    }
    let (nr, nf) = (real.len() as f64, fake.len() as f64);
    let (lr, tape_r) = disc.forward(real, schedule)?;
    let (lf, tape_f) = disc.forward(fake, schedule)?;
    let mut value = lr.iter().map(|&l| softplus(-l)).sum::<f64>() / nr + lf.iter().map(|&l| softplus(l)).sum::<f64>() / nf;

    let seed_r = lr.mapv(|l| -sigmoid(-l) / nr);
    let seed_f = lf.mapv(|l| sigmoid(l) / nf);
    let (mut grads, _) = disc.backward(&tape_r, &seed_r, real, schedule)?;
    let (gf, _) = disc.backward(&tape_f, &seed_f, fake, schedule)?;
    for (g, v) in grads.iter_mut().zip(gf) {
        *g += v;
    }
    if r1_gamma > 0.0 {
        let (pen, gp) = disc.grad_norm_penalty(real, schedule)?;
        value += 0.5 * r1_gamma * pen;
        for (g, v) in grads.iter_mut().zip(gp) {
            *g += 0.5 * r1_gamma * v;
        }
    }
    Ok((value, grads))
}
