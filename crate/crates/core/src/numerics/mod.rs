//! Dense kernels, seeded randomness, SVD/pseudoinverse, Adam and
//! finite-difference gradient checks.

mod adam;
mod fd;
mod linalg;
mod rng;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use fd::finite_diff_grad;
pub use linalg::{pseudoinverse, svd, Svd, DEFAULT_PINV_TOL};
pub use rng::{gaussian_vector, RngSnapshot, RngState};
