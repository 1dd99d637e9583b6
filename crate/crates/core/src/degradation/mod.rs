//! Forward degradation processes.
//!
//! Every step operator has the form `A_k = a_k P_{j_k}` where `P_j` averages
//! `2^j × 2^j` pixel blocks per channel, and the noise is isotropic with
//! standard deviation `σ_k` in the step-k (possibly downscaled) space.

mod beta;
mod block;
mod schedule;

pub use beta::{beta, beta_tilde, BetaParams};
pub use block::{BlockAvgOp, DataShape};
pub use schedule::{
    Decomposition, DegradationSchedule, Posterior, ScheduleDescriptor, ScheduleKind, StepOperator, StepSummary,
};
