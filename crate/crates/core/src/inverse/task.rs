use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::degradation::{BlockAvgOp, DataShape};
use crate::error::{invalid, Result};
use crate::numerics::RngState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Denoise,
    SuperResolve,
    Colorize,
}

impl std::str::FromStr for TaskKind {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "denoise" => Ok(TaskKind::Denoise),
            "sr" | "super_resolve" => Ok(TaskKind::SuperResolve),
            "color" | "colorize" => Ok(TaskKind::Colorize),
            other => invalid(format!("unknown inverse task '{other}'")),
        }
    }
}

/// Structured observation operator. Each variant has `A Aᵀ = s² I`, which
/// gives the fidelity proximal operator a closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ObservationOp {
    Identity { shape: DataShape },
    BlockAverage(BlockAvgOp),
    ChannelAverage { shape: DataShape },
}

impl ObservationOp {
    pub fn input_shape(&self) -> DataShape {
        match self {
            ObservationOp::Identity { shape } | ObservationOp::ChannelAverage { shape } => *shape,
            ObservationOp::BlockAverage(op) => op.input,
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            ObservationOp::Identity { shape } => shape.dim(),
            ObservationOp::BlockAverage(op) => op.output.dim(),
            ObservationOp::ChannelAverage { shape } => shape.height * shape.width,
        }
    }

    /// The common squared singular value `s²`.
    pub fn singular_value_sq(&self) -> f64 {
        match self {
            ObservationOp::Identity { .. } => 1.0,
            ObservationOp::BlockAverage(op) => 0.25f64.powi(op.level as i32),
            ObservationOp::ChannelAverage { shape } => 1.0 / shape.channels as f64,
        }
    }

    pub fn apply(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        match self {
            ObservationOp::Identity { shape } => {
                if x.ncols() != shape.dim() {
                    return invalid("identity operator: dimension mismatch");
                }
                Ok(x.to_owned())
            }
            ObservationOp::BlockAverage(op) => op.apply(x),
            ObservationOp::ChannelAverage { shape } => {
                let c = shape.channels;
                if x.ncols() != shape.dim() {
                    return invalid("channel average: dimension mismatch");
                }
                let pixels = shape.height * shape.width;
                Ok(Array2::from_shape_fn((x.nrows(), pixels), |(r, p)| {
                    (0..c).map(|ch| x[[r, p * c + ch]]).sum::<f64>() / c as f64
                }))
            }
        }
    }

    pub fn adjoint(&self, y: ArrayView2<f64>) -> Result<Array2<f64>> {
        match self {
            ObservationOp::Identity { .. } => self.apply(y),
            ObservationOp::BlockAverage(op) => op.adjoint(y),
            ObservationOp::ChannelAverage { shape } => Ok(self.replicate_channels(y, *shape)? / shape.channels as f64),
        }
    }

    /// `A† y`: identity, block replication, or grey replication.
    pub fn pinv(&self, y: ArrayView2<f64>) -> Result<Array2<f64>> {
        match self {
            ObservationOp::Identity { .. } => self.apply(y),
            ObservationOp::BlockAverage(op) => op.replicate(y),
            ObservationOp::ChannelAverage { shape } => self.replicate_channels(y, *shape),
        }
    }

    fn replicate_channels(&self, y: ArrayView2<f64>, shape: DataShape) -> Result<Array2<f64>> {
        let pixels = shape.height * shape.width;
        if y.ncols() != pixels {
            return invalid("channel replication: dimension mismatch");
        }
        let c = shape.channels;
        Ok(Array2::from_shape_fn((y.nrows(), shape.dim()), |(r, i)| y[[r, i / c]]))
    }

    /// Dense matrix for one example; used for cross-checks.
    pub fn to_dense(&self) -> Result<Array2<f64>> {
        let n = self.input_shape().dim();
        Ok(self.apply(Array2::eye(n).view())?.reversed_axes())
    }
}

/// An observation batch `y = A x + σ n` together with its operator.
#[derive(Debug, Clone, PartialEq)]
pub struct InverseTask {
    pub kind: TaskKind,
    pub op: ObservationOp,
    /// Standard deviation of the observation noise.
    pub sigma_obs: f64,
    pub observation: Array2<f64>,
    pub truth: Option<Array2<f64>>,
}

fn observe(
    kind: TaskKind,
    op: ObservationOp,
    truth: &Array2<f64>,
    sigma_obs: f64,
    rng: &mut RngState,
) -> Result<InverseTask> {
    if !(sigma_obs >= 0.0) {
        return invalid("observation noise must be non-negative");
    }
    let mut y = op.apply(truth.view())?;
    if sigma_obs > 0.0 {
        y.mapv_inplace(|v| v + sigma_obs * rng.normal());
    }
    Ok(InverseTask {
        kind,
        op,
        sigma_obs,
        observation: y,
        truth: Some(truth.clone()),
    })
}

/// `y = x + σ n`.
pub fn make_denoise(truth: &Array2<f64>, shape: DataShape, sigma: f64, rng: &mut RngState) -> Result<InverseTask> {
    if !(sigma > 0.0) {
        return invalid("denoising needs a positive noise level");
    }
    observe(TaskKind::Denoise, ObservationOp::Identity { shape }, truth, sigma, rng)
}

/// `y = P x + σ n` with `P` averaging `factor × factor` blocks; `factor`
/// must be a power of two dividing the image side.
pub fn make_sr(
    truth: &Array2<f64>,
    shape: DataShape,
    factor: usize,
    sigma: f64,
    rng: &mut RngState,
) -> Result<InverseTask> {
    if factor < 2 || !factor.is_power_of_two() {
        return invalid(format!("super-resolution factor {factor} must be a power of two >= 2"));
    }
    let op = BlockAvgOp::new(factor.trailing_zeros(), shape)?;
    observe(TaskKind::SuperResolve, ObservationOp::BlockAverage(op), truth, sigma, rng)
}

/// `y` = per-pixel channel average (plus optional noise).
pub fn make_colorize(truth: &Array2<f64>, shape: DataShape, sigma: f64, rng: &mut RngState) -> Result<InverseTask> {
    if shape.channels < 2 {
        return invalid("colorization needs a multi-channel shape");
    }
    observe(TaskKind::Colorize, ObservationOp::ChannelAverage { shape }, truth, sigma, rng)
}

impl InverseTask {
    pub fn shape(&self) -> DataShape {
        self.op.input_shape()
    }

    /// Noise level used to whiten the fidelity term. Noise-free observations
    /// use 1 so the proximal weight stays finite.
    pub fn fidelity_sigma(&self) -> f64 {
        if self.sigma_obs > 0.0 {
            self.sigma_obs
        } else {
            1.0
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.observation.ncols() != self.op.output_dim() {
            return invalid("observation width does not match the operator");
        }
        if let Some(t) = &self.truth {
            if t.ncols() != self.shape().dim() || t.nrows() != self.observation.nrows() {
                return invalid("ground truth shape does not match the task");
            }
        }
        Ok(())
    }
}

/// `A† y`, the reconstruction the solver starts from.
pub fn baseline_reconstruct(task: &InverseTask) -> Result<Array2<f64>> {
    task.validate()?;
    task.op.pinv(task.observation.view())
}
