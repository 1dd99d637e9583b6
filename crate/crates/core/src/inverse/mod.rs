//! Plug-and-play restoration: a trained generator acts as the prior inside a
//! Douglas–Rachford splitting whose fidelity step has a closed form.

mod prox;
mod solver;
mod task;

pub use prox::{prox_fidelity, prox_fidelity_dense};
pub use solver::{solve, PublishedSetting, SolveResult, SolverConfig};
pub use task::{baseline_reconstruct, make_colorize, make_denoise, make_sr, InverseTask, ObservationOp, TaskKind};
