//! Kernel maximum mean discrepancy with a mixture of Gaussian kernels.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MmdConfig {
    pub bandwidths: Vec<f64>,
}

impl Default for MmdConfig {
    fn default() -> Self {
        Self {
            bandwidths: vec![0.1, 0.5, 1.0, 2.0, 10.0],
        }
    }
}

impl MmdConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bandwidths.is_empty() || self.bandwidths.iter().any(|&b| !(b > 0.0)) {
            return invalid("mmd bandwidths must be non-empty and positive");
        }
        Ok(())
    }
}

/// `Σ_b exp(−d²/(2σ_b²))` and its derivative with respect to `d²`.
fn kernel(d2: f64, inv2s2: &[f64]) -> (f64, f64) {
    let mut k = 0.0;
    let mut dk = 0.0;
    for &c in inv2s2 {
        let e = (-d2 * c).exp();
        k += e;
        dk -= c * e;
    }
    (k, dk)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Unbiased-form MMD between equal-size batches and its gradient with
/// respect to `x`. Sums run over ordered pairs `i ≠ j` and are normalised by
/// `C(M, 2)`.
pub fn mmd(x: ArrayView2<f64>, y: ArrayView2<f64>, config: &MmdConfig) -> Result<(f64, Array2<f64>)> {
    mmd_impl(x, y, config, true)
}

/// As [`mmd`] but skips the `y`–`y` sum, which carries no gradient; the
/// returned value is therefore offset by a constant.
pub fn mmd_without_target_term(
    x: ArrayView2<f64>,
    y: ArrayView2<f64>,
    config: &MmdConfig,
) -> Result<(f64, Array2<f64>)> {
    mmd_impl(x, y, config, false)
}

fn mmd_impl(x: ArrayView2<f64>, y: ArrayView2<f64>, config: &MmdConfig, with_yy: bool) -> Result<(f64, Array2<f64>)> {
    config.validate()?;
    let m = x.nrows();
    if m < 2 || y.nrows() != m {
        return invalid(format!("mmd needs two batches of equal size >= 2, got {} and {}", m, y.nrows()));
    }
    if x.ncols() != y.ncols() {
        return invalid("mmd: dimension mismatch");
    }
    let inv2s2: Vec<f64> = config.bandwidths.iter().map(|b| 0.5 / (b * b)).collect();
    let norm = 2.0 / (m * (m - 1)) as f64;
    let x = x.as_standard_layout();
    let y = y.as_standard_layout();
    let rows_x: Vec<&[f64]> = x.outer_iter().map(|r| r.to_slice().unwrap()).collect::<Vec<_>>();
    let rows_y: Vec<&[f64]> = y.outer_iter().map(|r| r.to_slice().unwrap()).collect::<Vec<_>>();
    let dim = x.ncols();
    let mut grad = Array2::<f64>::zeros((m, dim));
    let mut xx = 0.0;
    let mut xy = 0.0;
    let mut yy = 0.0;
    for i in 0..m {
        for j in (i + 1)..m {
            let (k, dk) = kernel(sq_dist(rows_x[i], rows_x[j]), &inv2s2);
            xx += 2.0 * k;
            // d/dx_i of 2k(x_i, x_j) = 2 dk · 2(x_i − x_j)
            for c in 0..dim {
                let diff = rows_x[i][c] - rows_x[j][c];
                let g = 4.0 * dk * diff * norm;
                grad[[i, c]] += g;
                grad[[j, c]] -= g;
            }
            if with_yy {
                yy += 2.0 * kernel(sq_dist(rows_y[i], rows_y[j]), &inv2s2).0;
            }
        }
        for j in 0..m {
            if i == j {
                continue;
            }
            let (k, dk) = kernel(sq_dist(rows_x[i], rows_y[j]), &inv2s2);
            xy += k;
            for c in 0..dim {
                grad[[i, c]] -= 2.0 * dk * 2.0 * (rows_x[i][c] - rows_y[j][c]) * norm;
            }
        }
    }
    Ok((norm * (xx - 2.0 * xy + yy), grad))
}
