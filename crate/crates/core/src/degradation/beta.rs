use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Endpoints of the quadratic log-gain schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaParams {
    pub beta_max: f64,
    pub beta_min: f64,
}

impl Default for BetaParams {
    fn default() -> Self {
        Self {
            beta_max: 20.0,
            beta_min: 0.1,
        }
    }
}

impl BetaParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta_max > self.beta_min && self.beta_min > 0.0) {
            return invalid(format!(
                "beta params need beta_max > beta_min > 0, got ({}, {})",
                self.beta_max, self.beta_min
            ));
        }
        Ok(())
    }
}

fn check(k: usize, t_beta: f64) -> Result<f64> {
    if !(t_beta > 0.0) {
        return invalid("beta: horizon must be positive");
    }
    if k as f64 > t_beta {
        return invalid(format!("beta: step {k} exceeds horizon {t_beta}"));
    }
    Ok(k as f64 / t_beta)
}

/// `¼(β_max − β_min)(k/T)² + ½β_min (k/T)`.
pub fn beta(k: usize, t_beta: f64, p: &BetaParams) -> Result<f64> {
    let r = check(k, t_beta)?;
    Ok(0.25 * (p.beta_max - p.beta_min) * r * r + 0.5 * p.beta_min * r)
}

/// `¼(β_max − β_min)(k/T)⁴ + ½β_min (k/T)²`.
pub fn beta_tilde(k: usize, t_beta: f64, p: &BetaParams) -> Result<f64> {
    let r = check(k, t_beta)?;
    let r2 = r * r;
    Ok(0.25 * (p.beta_max - p.beta_min) * r2 * r2 + 0.5 * p.beta_min * r2)
}
