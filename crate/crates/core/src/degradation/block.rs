use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Layout of one example: row-major `(height, width, channels)`.
///
/// Point-cloud data uses `height = width = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DataShape {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl DataShape {
    pub fn new(height: usize, width: usize, channels: usize) -> Self {
        Self {
            height,
            width,
            channels,
        }
    }

    /// Flat vectors of length `dim`.
    pub fn vector(dim: usize) -> Self {
        Self::new(1, 1, dim)
    }

    pub fn dim(&self) -> usize {
        self.height * self.width * self.channels
    }

    /// Shape after averaging `2^level` blocks.
    pub fn downscaled(&self, level: u32) -> Result<DataShape> {
        let f = 1usize << level;
        if self.height % f != 0 || self.width % f != 0 {
            return invalid(format!(
                "shape {}x{} is not divisible by 2^{level}",
                self.height, self.width
            ));
        }
        Ok(DataShape::new(self.height / f, self.width / f, self.channels))
    }
}

/// `P_j`: average over `2^j × 2^j` pixel blocks, per channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockAvgOp {
    pub level: u32,
    pub input: DataShape,
    pub output: DataShape,
}

impl BlockAvgOp {
    pub fn new(level: u32, input: DataShape) -> Result<Self> {
        Ok(Self {
            level,
            input,
            output: input.downscaled(level)?,
        })
    }

    fn factor(&self) -> usize {
        1 << self.level
    }

    /// Rows of `x` are flattened images of shape `input`.
    pub fn apply(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.input.dim() {
            return invalid(format!(
                "block average expects dim {}, got {}",
                self.input.dim(),
                x.ncols()
            ));
        }
        if self.level == 0 {
            return Ok(x.to_owned());
        }
        let f = self.factor();
        let (w, c) = (self.input.width, self.input.channels);
        let (oh, ow) = (self.output.height, self.output.width);
        let norm = 1.0 / (f * f) as f64;
        let mut out = Array2::<f64>::zeros((x.nrows(), self.output.dim()));
        for (row, mut dst) in x.outer_iter().zip(out.outer_iter_mut()) {
            for i in 0..oh {
                for j in 0..ow {
                    for ch in 0..c {
                        let mut acc = 0.0;
                        for di in 0..f {
                            for dj in 0..f {
                                acc += row[((i * f + di) * w + j * f + dj) * c + ch];
                            }
                        }
                        dst[(i * ow + j) * c + ch] = acc * norm;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Block replication, the pseudoinverse of [`BlockAvgOp::apply`].
    pub fn replicate(&self, y: ArrayView2<f64>) -> Result<Array2<f64>> {
        if y.ncols() != self.output.dim() {
            return invalid(format!(
                "block replication expects dim {}, got {}",
                self.output.dim(),
                y.ncols()
            ));
        }
        if self.level == 0 {
            return Ok(y.to_owned());
        }
        let f = self.factor();
        let (w, c) = (self.input.width, self.input.channels);
        let ow = self.output.width;
        let mut out = Array2::<f64>::zeros((y.nrows(), self.input.dim()));
        for (row, mut dst) in y.outer_iter().zip(out.outer_iter_mut()) {
            for i in 0..self.input.height {
                for j in 0..w {
                    for ch in 0..c {
                        dst[(i * w + j) * c + ch] = row[((i / f) * ow + j / f) * c + ch];
                    }
                }
            }
        }
        Ok(out)
    }

    /// `P_jᵀ y`, i.e. replication scaled by `4^{-j}`.
    pub fn adjoint(&self, y: ArrayView2<f64>) -> Result<Array2<f64>> {
        let f = self.factor() as f64;
        Ok(self.replicate(y)? / (f * f))
    }
}
