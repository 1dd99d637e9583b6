use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::numerics::RngState;

/// Eight isotropic Gaussians with centres equally spaced on a circle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Gmm8Spec {
    pub radius: f64,
    pub std: f64,
    /// Divide by the analytic per-coordinate standard deviation
    /// `√(R²/2 + s²)` so the mixture has zero mean and unit scale.
    pub standardize: bool,
}

impl Default for Gmm8Spec {
    fn default() -> Self {
        Self {
            radius: 2.0,
            std: 0.1,
            standardize: true,
        }
    }
}

impl Gmm8Spec {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0) || !(self.std > 0.0) {
            return invalid("gmm8 radius and std must be positive");
        }
        Ok(())
    }

    pub fn scale(&self) -> f64 {
        if self.standardize {
            (self.radius * self.radius / 2.0 + self.std * self.std).sqrt()
        } else {
            1.0
        }
    }

    /// Centres in the space samples are emitted in.
    pub fn centers(&self) -> [[f64; 2]; 8] {
        let r = self.radius / self.scale();
        std::array::from_fn(|i| {
            let angle = i as f64 * std::f64::consts::FRAC_PI_4;
            [r * angle.cos(), r * angle.sin()]
        })
    }

    /// Within-mode standard deviation in the emitted space.
    pub fn effective_std(&self) -> f64 {
        self.std / self.scale()
    }
}

pub fn sample_gmm8(n: usize, spec: &Gmm8Spec, rng: &mut RngState) -> Result<Array2<f64>> {
    spec.validate()?;
    if n == 0 {
        return invalid("sample_gmm8: n must be at least 1");
    }
    let centers = spec.centers();
    let s = spec.effective_std();
    let mut out = Array2::zeros((n, 2));
    for mut row in out.outer_iter_mut() {
        let c = centers[rng.index(8)];
        row[0] = c[0] + s * rng.normal();
        row[1] = c[1] + s * rng.normal();
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeCoverage {
    pub covered: usize,
    /// Fraction of all samples that landed within the radius of each centre.
    pub fractions: Vec<f64>,
}

pub const DEFAULT_COVERAGE_THRESHOLD: f64 = 0.02;

/// Assign each sample to its nearest centre and count the modes holding at
/// least `threshold` of all samples within `radius` (default three
/// within-mode standard deviations).
pub fn mode_coverage(
    samples: ArrayView2<f64>,
    spec: &Gmm8Spec,
    radius: Option<f64>,
    threshold: f64,
) -> Result<ModeCoverage> {
    if samples.ncols() != 2 {
        return invalid(format!("mode_coverage expects 2-D samples, got {}", samples.ncols()));
    }
    let centers = spec.centers();
    let radius = radius.unwrap_or(3.0 * spec.effective_std());
    let mut hits = [0usize; 8];
    for row in samples.outer_iter() {
        if !row.iter().all(|v| v.is_finite()) {
            continue;
        }
        let (best, d2) = centers
            .iter()
            .enumerate()
            .map(|(i, c)| (i, (row[0] - c[0]).powi(2) + (row[1] - c[1]).powi(2)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("eight centres");
        if d2 <= radius * radius {
            hits[best] += 1;
        }
    }
    let n = samples.nrows().max(1) as f64;
    let fractions: Vec<f64> = hits.iter().map(|&h| h as f64 / n).collect();
    let covered = if samples.nrows() == 0 {
        0
    } else {
        fractions.iter().filter(|&&f| f >= threshold).count()
    };
    Ok(ModeCoverage { covered, fractions })
}
