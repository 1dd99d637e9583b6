//! MAP-style training of restoration generators, the MMSE baseline, and the
//! direct data-matching ablation.

mod config;
mod trainer;

pub use config::{lambda_serde, Algorithm, GeneratorSettings, TrainConfig};
pub use trainer::{train, AbortInfo, CHECKPOINT_FILE, LogEntry, RunRecord, StepDraws, StepLosses, Trainer};
