//! Benchmark datasets, their file formats, and the metrics used to score
//! generated samples and restorations.

mod gmm;
mod metrics;
mod toy;

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

pub use gmm::{mode_coverage, sample_gmm8, Gmm8Spec, ModeCoverage, DEFAULT_COVERAGE_THRESHOLD};
pub use metrics::{energy_distance, mean_psnr, mean_ssim, psnr, ssim, PSNR_CAP_DB};
pub use toy::{make_toy_images, ToyFamily, ToyImageSpec};

use crate::degradation::DataShape;
use crate::error::{Error, Result};

/// Where training data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DatasetSpec {
    Gmm8 {
        #[serde(flatten)]
        spec: Gmm8Spec,
        size: usize,
        seed: u64,
    },
    Toy {
        #[serde(flatten)]
        spec: ToyImageSpec,
        /// Number of images; `size` is taken by the image side length.
        count: usize,
    },
}

impl DatasetSpec {
    pub fn shape(&self) -> DataShape {
        match self {
            DatasetSpec::Gmm8 { .. } => DataShape::vector(2),
            DatasetSpec::Toy { spec, .. } => spec.shape(),
        }
    }

    pub fn materialize(&self) -> Result<Array2<f64>> {
        match self {
            DatasetSpec::Gmm8 { spec, size, seed } => {
                sample_gmm8(*size, spec, &mut crate::numerics::RngState::new(*seed))
            }
            DatasetSpec::Toy { spec, count } => make_toy_images(spec, *count),
        }
    }
}

/// Write rows as CSV with a header `x0,x1,…`.
pub fn write_csv(path: impl AsRef<Path>, rows: &Array2<f64>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record((0..rows.ncols()).map(|j| format!("x{j}")))?;
    for row in rows.outer_iter() {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Array2<f64>> {
    let mut r = csv::Reader::from_path(path)?;
    let cols = r.headers()?.len();
    let mut flat = Vec::new();
    let mut n = 0;
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != cols {
            return Err(Error::CorruptFile(format!("row {n} has {} fields, expected {cols}", rec.len())));
        }
        for field in rec.iter() {
            flat.push(
                field
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::CorruptFile(format!("row {n}: {e}")))?,
            );
        }
        n += 1;
    }
    Array2::from_shape_vec((n, cols), flat).map_err(|e| Error::CorruptFile(e.to_string()))
}

/// Image batches on disk: a shape header plus the flat values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageFile {
    pub shape: DataShape,
    pub count: usize,
    pub values: Vec<f64>,
}

impl ImageFile {
    pub fn from_rows(shape: DataShape, rows: &Array2<f64>) -> Result<Self> {
        if rows.ncols() != shape.dim() {
            return Err(Error::InvalidArgument(format!(
                "rows have {} columns, shape needs {}",
                rows.ncols(),
                shape.dim()
            )));
        }
        Ok(Self {
            shape,
            count: rows.nrows(),
            values: rows.iter().copied().collect(),
        })
    }

    pub fn to_rows(&self) -> Result<Array2<f64>> {
        Array2::from_shape_vec((self.count, self.shape.dim()), self.values.clone())
            .map_err(|e| Error::CorruptFile(format!("image file values: {e}")))
    }
}

pub fn write_images_json(path: impl AsRef<Path>, shape: DataShape, rows: &Array2<f64>) -> Result<()> {
    let file = ImageFile::from_rows(shape, rows)?;
    std::fs::write(path, serde_json::to_string(&file)?)?;
    Ok(())
}

pub fn read_images_json(path: impl AsRef<Path>) -> Result<(DataShape, Array2<f64>)> {
    let text = std::fs::read_to_string(path)?;
    let file: ImageFile = serde_json::from_str(&text).map_err(|e| Error::CorruptFile(e.to_string()))?;
    Ok((file.shape, file.to_rows()?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        let x = crate::numerics::RngState::new(1).normal_matrix(7, 3);
        write_csv(&path, &x).unwrap();
        assert_eq!(read_csv(&path).unwrap(), x);
    }

    #[test]
    fn image_json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("imgs.json");
        let spec = ToyImageSpec::default();
        let x = make_toy_images(&spec, 3).unwrap();
        write_images_json(&path, spec.shape(), &x).unwrap();
        let (shape, y) = read_images_json(&path).unwrap();
        assert_eq!(shape, spec.shape());
        assert_eq!(y, x);
    }

    #[test]
    fn dataset_spec_parses() {
        let d: DatasetSpec = serde_json::from_str(
            r#"{"kind":"gmm8","radius":2.0,"std":0.1,"standardize":true,"size":100,"seed":3}"#,
        )
        .unwrap();
        assert_eq!(d.materialize().unwrap().dim(), (100, 2));
    }

    #[test]
    fn toy_dataset_spec_round_trips() {
        let d = DatasetSpec::Toy {
            spec: ToyImageSpec {
                size: 8,
                ..Default::default()
            },
            count: 5,
        };
        let text = serde_json::to_string(&d).unwrap();
        let back: DatasetSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, d);
        assert_eq!(back.materialize().unwrap().dim(), (5, 64));
    }
}
