use std::path::Path;

use serde::{Deserialize, Serialize};

use super::nets::Generator;
use crate::degradation::ScheduleDescriptor;
use crate::error::{Error, Result};
use crate::numerics::{AdamState, RngSnapshot};
use crate::priors::PriorTerm;
use crate::training::Algorithm;

pub const CHECKPOINT_VERSION: u32 = 1;

/// Everything needed to sample from, or resume, a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub schedule: ScheduleDescriptor,
    pub algorithm: Algorithm,
    pub generator: Generator,
    pub prior: Option<PriorTerm>,
    pub step: u64,
    pub seed: u64,
    pub rng: Option<RngSnapshot>,
    pub generator_opt: Option<AdamState>,
}

impl Checkpoint {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::CorruptFile(format!("checkpoint is not valid JSON: {e}")))?;
        let found = value
            .get("version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| Error::CorruptFile("checkpoint has no version field".into()))?;
        if found != CHECKPOINT_VERSION as u64 {
            return Err(Error::VersionMismatch {
                expected: CHECKPOINT_VERSION,
                found,
            });
        }
        serde_json::from_value(value).map_err(|e| Error::CorruptFile(format!("checkpoint fields: {e}")))
    }
}

pub fn save_checkpoint(path: impl AsRef<Path>, ckpt: &Checkpoint) -> Result<()> {
    std::fs::write(path, ckpt.to_json()?)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let text = std::fs::read_to_string(path)?;
    Checkpoint::from_json(&text)
}
