//! Learnable prior terms `g_φ` that pull generated restorations toward the
//! degraded data law at the same step.
//!
//! Every prior compares a batch of generated samples against a batch of real
//! samples grouped by step index. Groups must line up: group `i` of the fake
//! batch and group `i` of the real batch share a step and a row count.

mod kld;
mod mmd;
mod sliced;

use ndarray::{concatenate, Array2, Axis};
use serde::{Deserialize, Serialize};

pub use kld::{discriminator_loss, kld_generator_term, sigmoid, softplus};
pub use mmd::{mmd, mmd_without_target_term, MmdConfig};
pub use sliced::{dswd, sliced_w2, sliced_w2_1d, DswdConfig, DswdState};

use crate::degradation::DegradationSchedule;
use crate::error::{invalid, Error, Result};
use crate::neural::{Discriminator, DiscriminatorConfig, StepBatch, StepEncoding};
use crate::numerics::{AdamConfig, AdamState, RngState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorKind {
    Kld,
    Mmd,
    Dswd,
}

impl std::fmt::Display for PriorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PriorKind::Kld => "kld",
            PriorKind::Mmd => "mmd",
            PriorKind::Dswd => "dswd",
        })
    }
}

fn default_disc_hidden() -> usize {
    32
}

fn default_disc_depth() -> usize {
    3
}

/// Prior selection plus kind-specific hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PriorConfig {
    Kld {
        #[serde(default = "default_disc_hidden")]
        hidden: usize,
        #[serde(default = "default_disc_depth")]
        depth: usize,
        #[serde(default)]
        step_encoding: StepEncoding,
    },
    Mmd(MmdConfig),
    Dswd(DswdConfig),
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorConfig::Kld {
            hidden: default_disc_hidden(),
            depth: default_disc_depth(),
            step_encoding: StepEncoding::default(),
        }
    }
}

impl PriorConfig {
    pub fn kind(&self) -> PriorKind {
        match self {
            PriorConfig::Kld { .. } => PriorKind::Kld,
            PriorConfig::Mmd(_) => PriorKind::Mmd,
            PriorConfig::Dswd(_) => PriorKind::Dswd,
        }
    }
}

/// A prior together with whatever state it learns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PriorTerm {
    Kld {
        disc: Discriminator,
        opt: AdamState,
        r1_gamma: f64,
    },
    Mmd {
        config: MmdConfig,
    },
    Dswd {
        config: DswdConfig,
        state: DswdState,
    },
}

fn check_aligned(real: &StepBatch, fake: &StepBatch) -> Result<()> {
    if real.groups.len() != fake.groups.len()
        || real
            .groups
            .iter()
            .zip(&fake.groups)
            .any(|(r, f)| r.k != f.k || r.rows.dim() != f.rows.dim())
    {
        return invalid("real and fake batches must have matching step groups");
    }
    if fake.is_empty() {
        return invalid("prior evaluated on an empty batch");
    }
    Ok(())
}

fn lifted(batch: &StepBatch, schedule: &DegradationSchedule) -> Result<Vec<Array2<f64>>> {
    batch
        .groups
        .iter()
        .map(|g| schedule.step(g.k)?.lift(g.rows.view()))
        .collect()
}

fn stack(blocks: &[Array2<f64>]) -> Result<Array2<f64>> {
    let views: Vec<_> = blocks.iter().map(|b| b.view()).collect();
    concatenate(Axis(0), &views).map_err(|e| Error::InvalidState(e.to_string()))
}

impl PriorTerm {
    /// Fresh prior for `schedule`. `optimizer` drives whichever learnable
    /// state the prior owns (the discriminator for KLD).
    pub fn new(
        config: &PriorConfig,
        schedule: &DegradationSchedule,
        optimizer: AdamConfig,
        r1_gamma: f64,
        rng: &mut RngState,
    ) -> Result<Self> {
        if !(r1_gamma >= 0.0) {
            return invalid("r1_gamma must be non-negative");
        }
        match config {
            PriorConfig::Kld {
                hidden,
                depth,
                step_encoding,
            } => {
                let disc = Discriminator::new(
                    DiscriminatorConfig {
                        data_dim: schedule.data_dim(),
                        hidden: *hidden,
                        depth: *depth,
                        step_encoding: *step_encoding,
                        total_steps: schedule.total_steps(),
                    },
                    rng,
                )?;
                let opt = AdamState::new(disc.net.num_params(), optimizer);
                Ok(PriorTerm::Kld { disc, opt, r1_gamma })
            }
            PriorConfig::Mmd(cfg) => {
                cfg.validate()?;
                Ok(PriorTerm::Mmd { config: cfg.clone() })
            }
            PriorConfig::Dswd(cfg) => {
                let state = DswdState::new(schedule.data_dim(), cfg, None, rng)?;
                Ok(PriorTerm::Dswd {
                    config: cfg.clone(),
                    state,
                })
            }
        }
    }

    pub fn kind(&self) -> PriorKind {
        match self {
            PriorTerm::Kld { .. } => PriorKind::Kld,
            PriorTerm::Mmd { .. } => PriorKind::Mmd,
            PriorTerm::Dswd { .. } => PriorKind::Dswd,
        }
    }

    /// Update the prior's own state against the current batches. Returns the
    /// discriminator loss for KLD, the ascent objective for DSWD, and `None`
    /// for MMD, which has nothing to learn.
    pub fn update(
        &mut self,
        real: &StepBatch,
        fake: &StepBatch,
        schedule: &DegradationSchedule,
        rng: &mut RngState,
    ) -> Result<Option<f64>> {
        check_aligned(real, fake)?;
        match self {
            PriorTerm::Kld { disc, opt, r1_gamma } => {
                let (loss, grads) = discriminator_loss(disc, real, fake, *r1_gamma, schedule)?;
                disc.net.adam_update(&grads, opt)?;
                Ok(Some(loss))
            }
            PriorTerm::Mmd { .. } => Ok(None),
            PriorTerm::Dswd { config, state } => {
                let x = stack(&lifted(fake, schedule)?)?;
                let y = stack(&lifted(real, schedule)?)?;
                Ok(Some(state.ascend(x.view(), y.view(), config, rng)?))
            }
        }
    }

    /// Exact prior value on `fake` and its gradient with respect to each
    /// group's rows.
    pub fn generator_term(
        &self,
        real: &StepBatch,
        fake: &StepBatch,
        schedule: &DegradationSchedule,
    ) -> Result<(f64, Vec<Array2<f64>>)> {
        self.evaluate(real, fake, schedule, true)
    }

    /// Same gradient as [`PriorTerm::generator_term`]; the value may omit
    /// terms that do not depend on `fake`, which saves the target-target
    /// kernel sum for MMD.
    pub fn generator_grad(
        &self,
        real: &StepBatch,
        fake: &StepBatch,
        schedule: &DegradationSchedule,
    ) -> Result<(f64, Vec<Array2<f64>>)> {
        self.evaluate(real, fake, schedule, false)
    }

    fn evaluate(
        &self,
        real: &StepBatch,
        fake: &StepBatch,
        schedule: &DegradationSchedule,
        exact: bool,
    ) -> Result<(f64, Vec<Array2<f64>>)> {
        check_aligned(real, fake)?;
        match self {
            PriorTerm::Kld { disc, .. } => kld_generator_term(disc, fake, schedule),
            PriorTerm::Mmd { config } => {
                let n = fake.len() as f64;
                let mut value = 0.0;
                let mut grads = Vec::with_capacity(fake.groups.len());
                for (f, r) in fake.groups.iter().zip(&real.groups) {
                    let m = f.rows.nrows();
                    if m < 2 {
                        grads.push(Array2::zeros(f.rows.dim()));
                        continue;
                    }
                    let w = m as f64 / n;
                    let (v, g) = if exact {
                        mmd(f.rows.view(), r.rows.view(), config)?
                    } else {
                        mmd_without_target_term(f.rows.view(), r.rows.view(), config)?
                    };
                    value += w * v;
                    grads.push(g * w);
                }
                Ok((value, grads))
            }
            PriorTerm::Dswd { state, .. } => {
                let n = fake.len() as f64;
                let mut value = 0.0;
                let mut grads = Vec::with_capacity(fake.groups.len());
                for (f, r) in fake.groups.iter().zip(&real.groups) {
                    let step = schedule.step(f.k)?;
                    let w = f.rows.nrows() as f64 / n;
                    let (v, g) = state.distance(step.lift(f.rows.view())?.view(), step.lift(r.rows.view())?.view())?;
                    value += w * v;
                    grads.push(step.lift_adjoint(g.view())? * w);
                }
                Ok((value, grads))
            }
        }
    }
}
