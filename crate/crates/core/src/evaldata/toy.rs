//! Procedural 16×16 images standing in for natural image datasets.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::degradation::DataShape;
use crate::error::{invalid, Result};
use crate::numerics::RngState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ToyFamily {
    Blobs,
    Gradients,
    Checkerboards,
    /// Each image picks one of the other families uniformly.
    Mixed,
}

impl std::str::FromStr for ToyFamily {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "blobs" => Ok(ToyFamily::Blobs),
            "gradients" => Ok(ToyFamily::Gradients),
            "checkerboards" => Ok(ToyFamily::Checkerboards),
            "mixed" => Ok(ToyFamily::Mixed),
            other => invalid(format!("unknown toy image family '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToyImageSpec {
    pub size: usize,
    pub channels: usize,
    pub family: ToyFamily,
    pub seed: u64,
}

impl Default for ToyImageSpec {
    fn default() -> Self {
        Self {
            size: 16,
            channels: 1,
            family: ToyFamily::Mixed,
            seed: 0,
        }
    }
}

impl ToyImageSpec {
    pub fn shape(&self) -> DataShape {
        DataShape::new(self.size, self.size, self.channels)
    }

    pub fn validate(&self) -> Result<()> {
        if self.size == 0 || self.size % 8 != 0 {
            return invalid(format!("toy image size {} must be a positive multiple of 8", self.size));
        }
        if self.channels != 1 && self.channels != 3 {
            return invalid("toy images have 1 or 3 channels");
        }
        Ok(())
    }
}

/// Per-channel tint in `[0.4, 1]` so colour images are not grey.
fn tint(channels: usize, rng: &mut RngState) -> Vec<f64> {
    if channels == 1 {
        vec![1.0]
    } else {
        (0..channels).map(|_| rng.uniform_range(0.4, 1.0)).collect()
    }
}

fn blobs(size: usize, rng: &mut RngState) -> Vec<f64> {
    let count = 1 + rng.index(3);
    let mut img = vec![0.0; size * size];
    for _ in 0..count {
        let cy = rng.uniform_range(2.0, size as f64 - 2.0);
        let cx = rng.uniform_range(2.0, size as f64 - 2.0);
        let r = rng.uniform_range(1.5, size as f64 / 4.0);
        let amp = rng.uniform_range(0.5, 1.0);
        for i in 0..size {
            for j in 0..size {
                let d2 = (i as f64 + 0.5 - cy).powi(2) + (j as f64 + 0.5 - cx).powi(2);
                img[i * size + j] += amp * (-d2 / (2.0 * r * r)).exp();
            }
        }
    }
    img.iter().map(|v| v.min(1.0)).collect()
}

fn gradient(size: usize, rng: &mut RngState) -> Vec<f64> {
    let angle = rng.uniform_range(0.0, std::f64::consts::TAU);
    let (s, c) = angle.sin_cos();
    let lo = rng.uniform_range(0.0, 0.3);
    let hi = rng.uniform_range(0.7, 1.0);
    let half = (size as f64 - 1.0) / 2.0;
    let span = half * (s.abs() + c.abs());
    let mut img = Vec::with_capacity(size * size);
    for i in 0..size {
        for j in 0..size {
            let t = ((i as f64 - half) * s + (j as f64 - half) * c) / span;
            img.push(lo + (hi - lo) * 0.5 * (t + 1.0));
        }
    }
    img
}

fn checkerboard(size: usize, rng: &mut RngState) -> Vec<f64> {
    // cell side 1 gives a pattern of period 2 pixels
    let cell = [1usize, 2, 4][rng.index(3)];
    let phase = rng.index(2);
    let a = rng.uniform_range(0.0, 0.3);
    let b = rng.uniform_range(0.7, 1.0);
    let mut img = Vec::with_capacity(size * size);
    for i in 0..size {
        for j in 0..size {
            let parity = (i / cell + j / cell + phase) % 2;
            img.push(if parity == 0 { a } else { b });
        }
    }
    img
}

/// `n` images as rows of an `n × (size·size·channels)` matrix, laid out as
/// `(row, column, channel)` and scaled to `[−1, 1]`.
pub fn make_toy_images(spec: &ToyImageSpec, n: usize) -> Result<Array2<f64>> {
    spec.validate()?;
    let mut rng = RngState::new(spec.seed);
    let size = spec.size;
    let ch = spec.channels;
    let mut out = Array2::zeros((n, size * size * ch));
    for mut row in out.outer_iter_mut() {
        let family = match spec.family {
            ToyFamily::Mixed => [ToyFamily::Blobs, ToyFamily::Gradients, ToyFamily::Checkerboards][rng.index(3)],
            f => f,
        };
        let base = match family {
            ToyFamily::Blobs => blobs(size, &mut rng),
            ToyFamily::Gradients => gradient(size, &mut rng),
            _ => checkerboard(size, &mut rng),
        };
        let colour = tint(ch, &mut rng);
        for (p, v) in base.iter().enumerate() {
            for (c, t) in colour.iter().enumerate() {
                row[p * ch + c] = (2.0 * v * t - 1.0).clamp(-1.0, 1.0);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::degradation::BlockAvgOp;

    #[test]
    fn deterministic_and_in_range() {
        for family in [ToyFamily::Blobs, ToyFamily::Gradients, ToyFamily::Checkerboards, ToyFamily::Mixed] {
            let spec = ToyImageSpec {
                family,
                channels: 3,
                seed: 4,
                ..ToyImageSpec::default()
            };
            let a = make_toy_images(&spec, 20).unwrap();
            assert_eq!(a, make_toy_images(&spec, 20).unwrap());
            assert!(a.iter().all(|v| (-1.0..=1.0).contains(v)));
            assert_eq!(a.ncols(), 768);
        }
    }

    #[test]
    fn period_two_checkerboard_averages_to_constant() {
        let spec = ToyImageSpec {
            family: ToyFamily::Checkerboards,
            seed: 1,
            ..ToyImageSpec::default()
        };
        let imgs = make_toy_images(&spec, 40).unwrap();
        let op = BlockAvgOp::new(1, spec.shape()).unwrap();
        let mut found = false;
        for img in imgs.outer_iter() {
            let v = img.to_vec();
            if (0..15).any(|j| v[j] == v[j + 1]) {
                continue;
            }
            found = true;
            let avg = op.apply(img.insert_axis(ndarray::Axis(0))).unwrap();
            let first = avg[[0, 0]];
            assert!(avg.iter().all(|x| (x - first).abs() < 1e-12));
        }
        assert!(found);
    }

    #[test]
    fn bad_specs_rejected() {
        let spec = ToyImageSpec {
            size: 12,
            ..ToyImageSpec::default()
        };
        assert!(make_toy_images(&spec, 1).is_err());
        assert!("stripes".parse::<ToyFamily>().is_err());
    }
}
