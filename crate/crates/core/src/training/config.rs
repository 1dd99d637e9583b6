use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::degradation::ScheduleDescriptor;
use crate::error::{invalid, Error, Result};
use crate::evaldata::DatasetSpec;
use crate::neural::{StepEncoding, ZMode};
use crate::numerics::AdamConfig;
use crate::priors::PriorConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    /// Re-degrade through the Gaussian posterior of a decomposable schedule.
    Posterior,
    /// Re-degrade through the forward process.
    Relaxed,
    /// Plain regression onto the clean data.
    Mmse,
    /// Compare restorations with clean data instead of re-degrading.
    Direct,
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "posterior" => Ok(Algorithm::Posterior),
            "relaxed" => Ok(Algorithm::Relaxed),
            "mmse" => Ok(Algorithm::Mmse),
            "direct" => Ok(Algorithm::Direct),
            other => invalid(format!("unknown algorithm '{other}'")),
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Algorithm::Posterior => "posterior",
            Algorithm::Relaxed => "relaxed",
            Algorithm::Mmse => "mmse",
            Algorithm::Direct => "direct",
        })
    }
}

/// Serialize `f64::INFINITY` as the string `"inf"`; plain numbers otherwise.
pub mod lambda_serde {
    use super::*;

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if v.is_infinite() && *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) if matches!(t.as_str(), "inf" | "infinity" | "Infinity") => Ok(f64::INFINITY),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("invalid lambda '{t}'"))),
        }
    }
}

fn default_hidden() -> usize {
    32
}

fn default_depth() -> usize {
    3
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSettings {
    #[serde(default = "default_hidden")]
    pub hidden: usize,
    /// Number of linear layers.
    #[serde(default = "default_depth")]
    pub depth: usize,
    /// Width of `z`; defaults to the data dimension. Ignored for MMSE.
    #[serde(default)]
    pub z_dim: Option<usize>,
    #[serde(default)]
    pub z_mode: ZMode,
    #[serde(default)]
    pub step_encoding: StepEncoding,
}

impl Default for GeneratorSettings {
    fn default() -> Self {
        Self {
            hidden: default_hidden(),
            depth: default_depth(),
            z_dim: None,
            z_mode: ZMode::Random,
            step_encoding: StepEncoding::Scalar,
        }
    }
}

fn default_lambda() -> f64 {
    1.0
}
fn default_lr() -> f64 {
    1e-4
}
fn default_batch() -> usize {
    1000
}
fn default_r1() -> f64 {
    0.05
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_log_every() -> u64 {
    1000
}
fn default_eval_samples() -> usize {
    500
}

/// One experiment, as read from a JSON config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub schedule: ScheduleDescriptor,
    pub algorithm: Algorithm,
    #[serde(default)]
    pub prior: PriorConfig,
    /// Regularisation weight; the generator minimises
    /// `prior + fidelity / lambda`. `"inf"` turns the fidelity off.
    #[serde(default = "default_lambda", with = "lambda_serde")]
    pub lambda: f64,
    #[serde(default = "default_lr")]
    pub lr_g: f64,
    #[serde(default = "default_lr")]
    pub lr_d: f64,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    pub iterations: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_r1")]
    pub r1_gamma: f64,
    /// Adam moment decay rates shared by both optimisers.
    #[serde(default = "default_beta1")]
    pub adam_beta1: f64,
    #[serde(default = "default_beta2")]
    pub adam_beta2: f64,
    #[serde(default = "default_log_every")]
    pub log_every: u64,
    /// Generated and reference samples used for the energy distance logged
    /// at each log point; 0 disables it.
    #[serde(default = "default_eval_samples")]
    pub eval_samples: usize,
    #[serde(default)]
    pub generator: GeneratorSettings,
    pub dataset: DatasetSpec,
}

impl TrainConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: TrainConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn adam(&self, lr: f64) -> AdamConfig {
        AdamConfig {
            lr,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            ..AdamConfig::default()
        }
    }

    pub fn inverse_lambda(&self) -> f64 {
        if self.lambda.is_infinite() {
            0.0
        } else {
            1.0 / self.lambda
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return invalid("batch_size must be positive");
        }
        if self.algorithm != Algorithm::Mmse && !(self.lambda > 0.0) {
            return invalid("lambda must be positive");
        }
        if !(self.lr_g > 0.0) || !(self.lr_d > 0.0) {
            return invalid("learning rates must be positive");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return invalid("adam betas must lie in [0, 1)");
        }
        if self.log_every == 0 {
            return invalid("log_every must be positive");
        }
        if self.dataset.shape() != self.schedule.shape {
            return invalid(format!(
                "dataset shape {:?} does not match schedule shape {:?}",
                self.dataset.shape(),
                self.schedule.shape
            ));
        }
        let schedule = self.schedule.build()?;
        if self.algorithm == Algorithm::Posterior && !schedule.is_fully_decomposable() {
            return Err(Error::UnsupportedSchedule(format!(
                "posterior training needs a decomposable schedule; {:?} is not",
                self.schedule.kind
            )));
        }
        Ok(())
    }
}
