use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::mlp::{Mlp, OutputActivation, Tape};
use crate::degradation::DegradationSchedule;
use crate::error::{invalid, Error, Result};
use crate::numerics::RngState;

/// How the step index enters the network input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StepEncoding {
    /// A single `k / T` column.
    #[default]
    Scalar,
    /// `T + 1` indicator columns.
    OneHot,
}

impl StepEncoding {
    pub fn width(&self, total_steps: usize) -> usize {
        match self {
            StepEncoding::Scalar => 1,
            StepEncoding::OneHot => total_steps + 1,
        }
    }
}

pub fn encode_step(k: usize, total_steps: usize, enc: StepEncoding) -> Vec<f64> {
    match enc {
        StepEncoding::Scalar => vec![k as f64 / total_steps as f64],
        StepEncoding::OneHot => {
            let mut v = vec![0.0; total_steps + 1];
            v[k] = 1.0;
            v
        }
    }
}

/// Rows that share one step index `k`, stored in the step-k space.
#[derive(Debug, Clone, PartialEq)]
pub struct StepGroup {
    pub k: usize,
    pub rows: Array2<f64>,
}

/// A batch partitioned by step index. Row order everywhere else in the crate
/// is group order followed by row order within the group.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StepBatch {
    pub groups: Vec<StepGroup>,
}

impl StepBatch {
    pub fn single(k: usize, rows: Array2<f64>) -> Self {
        Self {
            groups: vec![StepGroup { k, rows }],
        }
    }

    pub fn len(&self) -> usize {
        self.groups.iter().map(|g| g.rows.nrows()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Same grouping, new rows.
    pub fn with_rows(&self, rows: Vec<Array2<f64>>) -> Self {
        Self {
            groups: self
                .groups
                .iter()
                .zip(rows)
                .map(|(g, r)| StepGroup { k: g.k, rows: r })
                .collect(),
        }
    }

    /// Split `flat` (group-ordered rows) back into per-group blocks.
    pub fn split_rows(&self, flat: &Array2<f64>) -> Vec<Array2<f64>> {
        let mut start = 0;
        self.groups
            .iter()
            .map(|g| {
                let n = g.rows.nrows();
                let block = flat.slice(s![start..start + n, ..]).to_owned();
                start += n;
                block
            })
            .collect()
    }
}

/// Lift each group to data space and append the step encoding (and `z`).
fn network_input(
    batch: &StepBatch,
    z: Option<ArrayView2<f64>>,
    schedule: &DegradationSchedule,
    enc: StepEncoding,
    total_steps: usize,
) -> Result<Array2<f64>> {
    let n = batch.len();
    let data_dim = schedule.data_dim();
    let enc_w = enc.width(total_steps);
    let z_dim = z.map(|z| z.ncols()).unwrap_or(0);
    if let Some(z) = z {
        if z.nrows() != n {
            return invalid(format!("z has {} rows for a batch of {n}", z.nrows()));
        }
    }
    let mut input = Array2::<f64>::zeros((n, data_dim + enc_w + z_dim));
    let mut start = 0;
    for g in &batch.groups {
        let step = schedule.step(g.k)?;
        if g.rows.ncols() != step.dim() {
            return invalid(format!(
                "step {} expects degraded dim {}, got {}",
                g.k,
                step.dim(),
                g.rows.ncols()
            ));
        }
        let m = g.rows.nrows();
        let lifted = step.lift(g.rows.view())?;
        let code = Array1::from(encode_step(g.k, total_steps, enc));
        let mut block = input.slice_mut(s![start..start + m, ..]);
        block.slice_mut(s![.., ..data_dim]).assign(&lifted);
        block.slice_mut(s![.., data_dim..data_dim + enc_w]).assign(&code);
        start += m;
    }
    if let Some(z) = z {
        input.slice_mut(s![.., data_dim + enc_w..]).assign(&z);
    }
    Ok(input)
}

fn check_schedule(data_dim: usize, total_steps: usize, schedule: &DegradationSchedule) -> Result<()> {
    if schedule.data_dim() != data_dim || schedule.total_steps() != total_steps {
        return Err(Error::InvalidState(format!(
            "network built for data dim {data_dim} / T={total_steps}, schedule has {} / T={}",
            schedule.data_dim(),
            schedule.total_steps()
        )));
    }
    Ok(())
}

/// How the auxiliary input `z` is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ZMode {
    #[default]
    Random,
    /// Always feed zeros, which removes the stochastic input.
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub data_dim: usize,
    /// Width of the auxiliary variable; 0 builds a deterministic network.
    pub z_dim: usize,
    #[serde(default)]
    pub z_mode: ZMode,
    pub hidden: usize,
    /// Number of linear layers.
    pub depth: usize,
    #[serde(default)]
    pub step_encoding: StepEncoding,
    pub total_steps: usize,
}

impl GeneratorConfig {
    pub fn input_dim(&self) -> usize {
        self.data_dim + self.step_encoding.width(self.total_steps) + self.z_dim
    }

    fn dims(&self) -> Result<Vec<usize>> {
        if self.depth == 0 {
            return invalid("generator depth must be at least 1");
        }
        let mut dims = vec![self.input_dim()];
        dims.extend(std::iter::repeat(self.hidden).take(self.depth - 1));
        dims.push(self.data_dim);
        Ok(dims)
    }
}

/// `G_θ(y_k, k, z)`: restores step-k observations to data space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub config: GeneratorConfig,
    pub net: Mlp,
}

impl Generator {
    pub fn new(config: GeneratorConfig, rng: &mut RngState) -> Result<Self> {
        let net = Mlp::glorot(&config.dims()?, OutputActivation::None, rng)?;
        Ok(Self { config, net })
    }

    pub fn from_net(config: GeneratorConfig, net: Mlp) -> Result<Self> {
        if net.dims() != config.dims()?.as_slice() {
            return invalid("generator network dims do not match its config");
        }
        Ok(Self { config, net })
    }

    fn input(&self, y: &StepBatch, z: Option<ArrayView2<f64>>, schedule: &DegradationSchedule) -> Result<Array2<f64>> {
        check_schedule(self.config.data_dim, self.config.total_steps, schedule)?;
        match (self.config.z_dim, z) {
            (0, Some(z)) if z.ncols() > 0 => return invalid("generator takes no z"),
            (d, Some(z)) if d != z.ncols() => return invalid(format!("z must have {d} columns")),
            (d, None) if d > 0 => return invalid("generator needs z"),
            _ => {}
        }
        let z = z.filter(|z| z.ncols() > 0);
        network_input(y, z, schedule, self.config.step_encoding, self.config.total_steps)
    }

    /// Auxiliary inputs for `n` rows, or `None` when the generator takes none.
    pub fn draw_z(&self, n: usize, rng: &mut RngState) -> Option<Array2<f64>> {
        match (self.config.z_dim, self.config.z_mode) {
            (0, _) => None,
            (d, ZMode::Random) => Some(rng.normal_matrix(n, d)),
            (d, ZMode::Zero) => Some(Array2::zeros((n, d))),
        }
    }

    pub fn apply(&self, y: &StepBatch, z: Option<ArrayView2<f64>>, schedule: &DegradationSchedule) -> Result<Array2<f64>> {
        self.net.predict(self.input(y, z, schedule)?.view())
    }

    pub fn forward(
        &self,
        y: &StepBatch,
        z: Option<ArrayView2<f64>>,
        schedule: &DegradationSchedule,
    ) -> Result<(Array2<f64>, Tape)> {
        self.net.forward(self.input(y, z, schedule)?.view())
    }

    /// Parameter gradient for `Σ out_grad ⊙ x̂`.
    pub fn backward(&self, tape: &Tape, out_grad: ArrayView2<f64>) -> Result<Vec<f64>> {
        Ok(self.net.backward(tape, out_grad)?.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscriminatorConfig {
    pub data_dim: usize,
    pub hidden: usize,
    pub depth: usize,
    #[serde(default)]
    pub step_encoding: StepEncoding,
    pub total_steps: usize,
}

impl DiscriminatorConfig {
    fn dims(&self) -> Result<Vec<usize>> {
        if self.depth == 0 {
            return invalid("discriminator depth must be at least 1");
        }
        let mut dims = vec![self.data_dim + self.step_encoding.width(self.total_steps)];
        dims.extend(std::iter::repeat(self.hidden).take(self.depth - 1));
        dims.push(1);
        Ok(dims)
    }
}

/// `D_φ(y, k)`: raw logit for a step-k observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discriminator {
    pub config: DiscriminatorConfig,
    pub net: Mlp,
}

impl Discriminator {
    pub fn new(config: DiscriminatorConfig, rng: &mut RngState) -> Result<Self> {
        let net = Mlp::glorot(&config.dims()?, OutputActivation::None, rng)?;
        Ok(Self { config, net })
    }

    pub fn zeros(config: DiscriminatorConfig) -> Result<Self> {
        let net = Mlp::zeros(&config.dims()?, OutputActivation::None)?;
        Ok(Self { config, net })
    }

    pub fn from_net(config: DiscriminatorConfig, net: Mlp) -> Result<Self> {
        if net.dims() != config.dims()?.as_slice() {
            return invalid("discriminator network dims do not match its config");
        }
        Ok(Self { config, net })
    }

    fn input(&self, y: &StepBatch, schedule: &DegradationSchedule) -> Result<Array2<f64>> {
        check_schedule(self.config.data_dim, self.config.total_steps, schedule)?;
        network_input(y, None, schedule, self.config.step_encoding, self.config.total_steps)
    }

    pub fn logits(&self, y: &StepBatch, schedule: &DegradationSchedule) -> Result<Array1<f64>> {
        Ok(self.net.predict(self.input(y, schedule)?.view())?.column(0).to_owned())
    }

    pub fn forward(&self, y: &StepBatch, schedule: &DegradationSchedule) -> Result<(Array1<f64>, Tape)> {
        let (out, tape) = self.net.forward(self.input(y, schedule)?.view())?;
        Ok((out.column(0).to_owned(), tape))
    }

    /// Gradients of `Σ logit_grad ⊙ logits` for the parameters and for each
    /// group's step-space rows.
    pub fn backward(
        &self,
        tape: &Tape,
        logit_grad: &Array1<f64>,
        y: &StepBatch,
        schedule: &DegradationSchedule,
    ) -> Result<(Vec<f64>, Vec<Array2<f64>>)> {
        let seed = logit_grad.view().insert_axis(Axis(1));
        let (gp, gx) = self.net.backward(tape, seed)?;
        let data = gx.slice(s![.., ..self.config.data_dim]).to_owned();
        let per_group = y
            .split_rows(&data)
            .into_iter()
            .zip(&y.groups)
            .map(|(g, grp)| schedule.step(grp.k)?.lift_adjoint(g.view()))
            .collect::<Result<Vec<_>>>()?;
        Ok((gp, per_group))
    }

    /// `mean_i ‖∇_y D(y_i)‖²` over the batch and its parameter gradient.
    pub fn grad_norm_penalty(&self, y: &StepBatch, schedule: &DegradationSchedule) -> Result<(f64, Vec<f64>)> {
        let input = self.input(y, schedule)?;
        let n = y.len() as f64;
        let data_dim = self.config.data_dim;
        self.net.input_grad_penalty(input.view(), |g0| {
            let data = g0.slice(s![.., ..data_dim]).to_owned();
            let mut value = 0.0;
            let mut blocks = Vec::with_capacity(y.groups.len());
            for (gd, grp) in y.split_rows(&data).into_iter().zip(&y.groups) {
                let step = schedule.step(grp.k)?;
                let gy = step.lift_adjoint(gd.view())?;
                value += gy.mapv(|v| v * v).sum();
                blocks.push(step.lift(gy.view())? * (2.0 / n));
            }
            let views: Vec<_> = blocks.iter().map(|b| b.view()).collect();
            let data_bar = concatenate(Axis(0), &views).map_err(|e| Error::InvalidState(e.to_string()))?;
            let mut bar = Array2::<f64>::zeros(g0.dim());
            bar.slice_mut(s![.., ..data_dim]).assign(&data_bar);
            Ok((value / n, bar))
        })
    }
}
