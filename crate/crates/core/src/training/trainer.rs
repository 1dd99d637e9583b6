use std::path::Path;

use ndarray::{concatenate, Array2, Axis};
use serde::{Deserialize, Serialize};

use super::config::{Algorithm, TrainConfig};
use crate::degradation::DegradationSchedule;
use crate::error::{Error, Result};
use crate::evaldata::energy_distance;
use crate::neural::{save_checkpoint, Checkpoint, Generator, GeneratorConfig, StepBatch, StepGroup, CHECKPOINT_VERSION};
use crate::numerics::{AdamState, RngState};
use crate::priors::PriorTerm;
use crate::sampling::generate;

/// Random quantities consumed by one training iteration. Fixing them makes
/// the generator objective a deterministic function of the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDraws {
    /// Clean rows grouped by their sampled step `k`.
    pub clean: StepBatch,
    /// `y_k ∼ q(y_k | x)` for each group.
    pub y_k: StepBatch,
    /// Real samples the prior compares restorations against: `y_{k−1}` at
    /// step `k − 1`, or clean data at step 0 for [`Algorithm::Direct`].
    pub real: StepBatch,
    pub z: Option<Array2<f64>>,
    /// Noise used to re-degrade each group's restoration.
    pub eps: Vec<Array2<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepLosses {
    /// Objective minimised by the generator.
    pub loss_g: f64,
    /// Prior value seen by the generator (up to a constant for MMD).
    pub prior: Option<f64>,
    /// Mean fidelity per example, before the `1/λ` weight.
    pub fidelity: f64,
    /// Discriminator loss for KLD, ascent objective for DSWD.
    pub loss_d_or_prior: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub iteration: u64,
    pub loss_g: f64,
    pub loss_d_or_prior: Option<f64>,
    pub prior: Option<f64>,
    pub fidelity: f64,
    pub energy_distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbortInfo {
    pub iteration: u64,
    pub reason: String,
}

/// File name of the checkpoint inside a run directory.
pub const CHECKPOINT_FILE: &str = "checkpoint.json";

/// What a training run produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: TrainConfig,
    pub entries: Vec<LogEntry>,
    pub final_iteration: u64,
    /// Checkpoint file name, relative to the run directory.
    pub checkpoint: Option<String>,
    pub abort: Option<AbortInfo>,
}

impl RunRecord {
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        fn opt(v: Option<f64>) -> String {
            v.map(|x| x.to_string()).unwrap_or_default()
        }
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["iteration", "loss_g", "loss_d_or_prior", "prior", "fidelity", "energy_distance"])?;
        for e in &self.entries {
            w.write_record([
                e.iteration.to_string(),
                e.loss_g.to_string(),
                opt(e.loss_d_or_prior),
                opt(e.prior),
                e.fidelity.to_string(),
                opt(e.energy_distance),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

fn stack(blocks: &[Array2<f64>], cols: usize) -> Result<Array2<f64>> {
    if blocks.is_empty() {
        return Ok(Array2::zeros((0, cols)));
    }
    let views: Vec<_> = blocks.iter().map(|b| b.view()).collect();
    concatenate(Axis(0), &views).map_err(|e| Error::InvalidState(e.to_string()))
}

/// Owns every piece of mutable training state.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub config: TrainConfig,
    pub schedule: DegradationSchedule,
    pub generator: Generator,
    pub generator_opt: AdamState,
    pub prior: Option<PriorTerm>,
    pub rng: RngState,
    pub iteration: u64,
    data: Array2<f64>,
}

impl Trainer {
    pub fn new(config: TrainConfig) -> Result<Self> {
        let data = config.dataset.materialize()?;
        Self::with_data(config, data)
    }

    /// Train on explicit rows instead of materialising `config.dataset`.
    pub fn with_data(config: TrainConfig, data: Array2<f64>) -> Result<Self> {
        config.validate()?;
        let schedule = config.schedule.build()?;
        if data.nrows() == 0 || data.ncols() != schedule.data_dim() {
            return Err(Error::InvalidArgument(format!(
                "dataset must be non-empty with {} columns",
                schedule.data_dim()
            )));
        }
        let rng = RngState::new(config.seed);
        let settings = config.generator;
        let z_dim = if config.algorithm == Algorithm::Mmse {
            0
        } else {
            settings.z_dim.unwrap_or(schedule.data_dim())
        };
        let gcfg = GeneratorConfig {
            data_dim: schedule.data_dim(),
            z_dim,
            z_mode: settings.z_mode,
            hidden: settings.hidden,
            depth: settings.depth,
            step_encoding: settings.step_encoding,
            total_steps: schedule.total_steps(),
        };
        let generator = Generator::new(gcfg, &mut rng.split(1))?;
        let generator_opt = AdamState::new(generator.net.num_params(), config.adam(config.lr_g));
        let prior = match config.algorithm {
            Algorithm::Mmse => None,
            _ => Some(PriorTerm::new(
                &config.prior,
                &schedule,
                config.adam(config.lr_d),
                config.r1_gamma,
                &mut rng.split(2),
            )?),
        };
        Ok(Self {
            config,
            schedule,
            generator,
            generator_opt,
            prior,
            rng,
            iteration: 0,
            data,
        })
    }

    /// Continue a run from `ckpt`; the config must describe the same
    /// schedule and algorithm.
    pub fn resume(config: TrainConfig, ckpt: &Checkpoint) -> Result<Self> {
        let data = config.dataset.materialize()?;
        Self::resume_with_data(config, data, ckpt)
    }

    pub fn resume_with_data(config: TrainConfig, data: Array2<f64>, ckpt: &Checkpoint) -> Result<Self> {
        if ckpt.schedule != config.schedule || ckpt.algorithm != config.algorithm {
            return Err(Error::InvalidState(
                "checkpoint schedule or algorithm differs from the config".into(),
            ));
        }
        let mut t = Self::with_data(config, data)?;
        if ckpt.generator.config != t.generator.config {
            return Err(Error::InvalidState("checkpoint generator differs from the config".into()));
        }
        t.generator = ckpt.generator.clone();
        t.prior = ckpt.prior.clone();
        if let Some(opt) = &ckpt.generator_opt {
            t.generator_opt = opt.clone();
        }
        if let Some(snap) = &ckpt.rng {
            t.rng = RngState::restore(snap)?;
        }
        t.iteration = ckpt.step;
        Ok(t)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            schedule: self.config.schedule,
            algorithm: self.config.algorithm,
            generator: self.generator.clone(),
            prior: self.prior.clone(),
            step: self.iteration,
            seed: self.config.seed,
            rng: Some(self.rng.snapshot()),
            generator_opt: Some(self.generator_opt.clone()),
        }
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    /// Draw a batch, per-example steps `k ∼ U{1..T}`, degraded observations,
    /// `z`, and re-degradation noise.
    pub fn draw(&mut self) -> Result<StepDraws> {
        let t = self.schedule.total_steps();
        let b = self.config.batch_size;
        let rows: Vec<usize> = (0..b).map(|_| self.rng.index(self.data.nrows())).collect();
        let ks: Vec<usize> = (0..b).map(|_| 1 + self.rng.index(t)).collect();
        let mut clean = Vec::new();
        for k in 1..=t {
            let idx: Vec<usize> = rows.iter().zip(&ks).filter(|(_, &kk)| kk == k).map(|(&r, _)| r).collect();
            if !idx.is_empty() {
                clean.push(StepGroup {
                    k,
                    rows: self.data.select(Axis(0), &idx),
                });
            }
        }
        let mut y_k = Vec::with_capacity(clean.len());
        let mut real = Vec::with_capacity(clean.len());
        for g in &clean {
            y_k.push(StepGroup {
                k: g.k,
                rows: self.schedule.forward_sample(g.k, g.rows.view(), &mut self.rng)?,
            });
            real.push(match self.config.algorithm {
                Algorithm::Direct => StepGroup {
                    k: 0,
                    rows: g.rows.clone(),
                },
                _ => StepGroup {
                    k: g.k - 1,
                    rows: self.schedule.forward_sample(g.k - 1, g.rows.view(), &mut self.rng)?,
                },
            });
        }
        let z = self.generator.draw_z(b, &mut self.rng);
        let mut eps = Vec::with_capacity(clean.len());
        for g in &clean {
            let dim = match self.config.algorithm {
                Algorithm::Relaxed | Algorithm::Posterior => self.schedule.step(g.k - 1)?.dim(),
                _ => 0,
            };
            eps.push(self.rng.normal_matrix(g.rows.nrows(), dim));
        }
        Ok(StepDraws {
            clean: StepBatch { groups: clean },
            y_k: StepBatch { groups: y_k },
            real: StepBatch { groups: real },
            z,
            eps,
        })
    }

    /// Restorations re-degraded to the prior's comparison space.
    fn fakes(&self, draws: &StepDraws, x_hat: &Array2<f64>) -> Result<StepBatch> {
        let parts = draws.y_k.split_rows(x_hat);
        let mut groups = Vec::with_capacity(parts.len());
        for ((xg, yg), eps) in parts.iter().zip(&draws.y_k.groups).zip(&draws.eps) {
            let k = yg.k;
            let rows = match self.config.algorithm {
                Algorithm::Relaxed => self.schedule.step(k - 1)?.degrade_with(xg.view(), eps.view())?,
                Algorithm::Posterior => {
                    let post = self.schedule.posterior(k)?;
                    let ax = self.schedule.step(k - 1)?.apply(xg.view())?;
                    ax * post.weight_x + &(&yg.rows * post.weight_y) + &(eps * post.std)
                }
                _ => xg.clone(),
            };
            groups.push(StepGroup {
                k: if self.config.algorithm == Algorithm::Direct { 0 } else { k - 1 },
                rows,
            });
        }
        Ok(StepBatch { groups })
    }

    /// Generator objective for fixed draws and its parameter gradient.
    pub fn generator_objective(&self, generator: &Generator, draws: &StepDraws) -> Result<(StepLosses, Vec<f64>)> {
        let b = draws.y_k.len() as f64;
        let z = draws.z.as_ref().map(|z| z.view());
        let (x_hat, tape) = generator.forward(&draws.y_k, z, &self.schedule)?;
        let inv_lambda = self.config.inverse_lambda();
        let dim = self.schedule.data_dim();

        if self.config.algorithm == Algorithm::Mmse {
            let target = stack(
                &draws.clean.groups.iter().map(|g| g.rows.clone()).collect::<Vec<_>>(),
                dim,
            )?;
            let diff = &x_hat - &target;
            let loss = diff.mapv(|v| v * v).sum() / b;
            let grads = generator.backward(&tape, (diff * (2.0 / b)).view())?;
            return Ok((
                StepLosses {
                    loss_g: loss,
                    prior: None,
                    fidelity: loss,
                    loss_d_or_prior: None,
                },
                grads,
            ));
        }

        let prior = self
            .prior
            .as_ref()
            .ok_or_else(|| Error::InvalidState("RGM training without a prior".into()))?;
        let fake = self.fakes(draws, &x_hat)?;
        let (prior_value, prior_grads) = prior.generator_grad(&draws.real, &fake, &self.schedule)?;
        let parts = draws.y_k.split_rows(&x_hat);
        let mut fidelity = 0.0;
        let mut out = Vec::with_capacity(parts.len());
        for (((xg, yg), fg), gy) in parts.iter().zip(&draws.y_k.groups).zip(&fake.groups).zip(prior_grads) {
            let k = yg.k;
            let gx = match self.config.algorithm {
                Algorithm::Posterior => {
                    let (f, gf) = self.schedule.fidelity_transition(k, fg.rows.view(), yg.rows.view())?;
                    fidelity += f;
                    let g_yhat = gy + &(gf * (inv_lambda / b));
                    let w = self.schedule.posterior(k)?.weight_x;
                    self.schedule.step(k - 1)?.adjoint(g_yhat.view())? * w
                }
                alg => {
                    let (f, gf) = self.schedule.fidelity_full(k, xg.view(), yg.rows.view())?;
                    fidelity += f;
                    let g_prior = if alg == Algorithm::Relaxed {
                        self.schedule.step(k - 1)?.adjoint(gy.view())?
                    } else {
                        gy
                    };
                    g_prior + &(gf * (inv_lambda / b))
                }
            };
            out.push(gx);
        }
        let out_grad = stack(&out, dim)?;
        let grads = generator.backward(&tape, out_grad.view())?;
        let fidelity = fidelity / b;
        Ok((
            StepLosses {
                loss_g: prior_value + inv_lambda * fidelity,
                prior: Some(prior_value),
                fidelity,
                loss_d_or_prior: None,
            },
            grads,
        ))
    }

    /// One prior update followed by one generator update.
    pub fn step(&mut self) -> Result<StepLosses> {
        let draws = self.draw()?;
        let loss_d = if self.prior.is_some() {
            let z = draws.z.as_ref().map(|z| z.view());
            let x_hat = self.generator.apply(&draws.y_k, z, &self.schedule)?;
            let fake = self.fakes(&draws, &x_hat)?;
            let prior = self.prior.as_mut().expect("checked above");
            prior.update(&draws.real, &fake, &self.schedule, &mut self.rng)?
        } else {
            None
        };
        let (mut losses, grads) = self.generator_objective(&self.generator, &draws)?;
        losses.loss_d_or_prior = loss_d;
        if !losses.loss_g.is_finite() || loss_d.is_some_and(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure(format!(
                "non-finite loss at iteration {}: {losses:?}",
                self.iteration
            )));
        }
        self.generator.net.adam_update(&grads, &mut self.generator_opt)?;
        self.iteration += 1;
        Ok(losses)
    }

    /// Energy distance between fresh samples and random data rows, drawn
    /// from a stream split off the training one so evaluation never
    /// perturbs training.
    pub fn evaluate(&self, n: usize) -> Result<f64> {
        let mut rng = self.rng.split(0x0e7a_1000 + self.iteration);
        let gen = generate(&self.generator, &self.schedule, n, &mut rng)?;
        let idx: Vec<usize> = (0..n).map(|_| rng.index(self.data.nrows())).collect();
        let reference = self.data.select(Axis(0), &idx);
        energy_distance(gen.samples.view(), reference.view())
    }

    /// Run until `config.iterations`, logging window means every
    /// `log_every` iterations. Writes `checkpoint.json`, `run.json` and
    /// `metrics.csv` into `out_dir` when given. A non-finite loss stops the
    /// run and is reported in [`RunRecord::abort`].
    pub fn run(&mut self, out_dir: Option<&Path>) -> Result<RunRecord> {
        let mut record = RunRecord {
            config: self.config.clone(),
            entries: Vec::new(),
            final_iteration: self.iteration,
            checkpoint: None,
            abort: None,
        };
        let mut window: Vec<StepLosses> = Vec::new();
        while self.iteration < self.config.iterations {
            match self.step() {
                Ok(l) => window.push(l),
                Err(Error::NumericalFailure(reason)) => {
                    record.abort = Some(AbortInfo {
                        iteration: self.iteration,
                        reason,
                    });
                    break;
                }
                Err(e) => return Err(e),
            }
            if self.iteration % self.config.log_every == 0 || self.iteration == self.config.iterations {
                record.entries.push(self.summarize(&window)?);
                window.clear();
            }
        }
        record.final_iteration = self.iteration;
        if let Some(dir) = out_dir {
            std::fs::create_dir_all(dir)?;
            let ckpt_path = dir.join(CHECKPOINT_FILE);
            save_checkpoint(&ckpt_path, &self.checkpoint())?;
            record.checkpoint = Some(CHECKPOINT_FILE.to_string());
            record.write_json(dir.join("run.json"))?;
            record.write_csv(dir.join("metrics.csv"))?;
        }
        Ok(record)
    }

    fn summarize(&self, window: &[StepLosses]) -> Result<LogEntry> {
        let n = window.len().max(1) as f64;
        let mean = |f: &dyn Fn(&StepLosses) -> Option<f64>| -> Option<f64> {
            let vals: Vec<f64> = window.iter().filter_map(f).collect();
            (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
        };
        let energy = if self.config.eval_samples > 0 {
            Some(self.evaluate(self.config.eval_samples)?)
        } else {
            None
        };
        Ok(LogEntry {
            iteration: self.iteration,
            loss_g: window.iter().map(|l| l.loss_g).sum::<f64>() / n,
            loss_d_or_prior: mean(&|l| l.loss_d_or_prior),
            prior: mean(&|l| l.prior),
            fidelity: window.iter().map(|l| l.fidelity).sum::<f64>() / n,
            energy_distance: energy,
        })
    }
}

/// Build a trainer for `config` and run it to completion.
pub fn train(config: TrainConfig, out_dir: Option<&Path>) -> Result<(RunRecord, Trainer)> {
    let mut trainer = Trainer::new(config)?;
    let record = trainer.run(out_dir)?;
    Ok((record, trainer))
}
