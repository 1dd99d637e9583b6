//! Restoration-based generative models at desk scale.
//!
//! A generator is trained to undo a linear degradation process
//! `y_k ~ N(A_k x, Σ_k)` with a MAP-style objective: a whitened data-fidelity
//! term plus a learnable prior (adversarial KL, kernel MMD or distributional
//! sliced Wasserstein). Generation runs the restoration hierarchically from
//! the latent law `p_T`, and a trained generator doubles as a plug-and-play
//! prior for inverse problems.
//!
//! Batches are `ndarray::Array2<f64>` with one example per row. Image data is
//! stored flat in row-major `(height, width, channel)` order.

pub mod degradation;
pub mod error;
pub mod evaldata;
pub mod inverse;
pub mod neural;
pub mod numerics;
pub mod priors;
pub mod sampling;
pub mod training;

pub use degradation::{
    BetaParams, DataShape, DegradationSchedule, ScheduleDescriptor, ScheduleKind, StepOperator,
};
pub use error::{Error, Result};
pub use neural::{Checkpoint, Discriminator, Generator, GeneratorConfig, Mlp, StepBatch};
pub use numerics::{AdamConfig, AdamState, RngState};
pub use priors::{PriorConfig, PriorKind, PriorTerm};
pub use training::{Algorithm, RunRecord, TrainConfig, Trainer};
