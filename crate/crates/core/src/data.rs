//! Small classification datasets: the two-moons generator and a CSV loader.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;

use crate::error::{Result, SalError};
use crate::nn::Batch;
use crate::params::Tensor;
use crate::rng::SalRng;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: Tensor,
    pub labels: Vec<usize>,
    pub classes: usize,
}

impl Dataset {
    pub fn new(inputs: Tensor, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if inputs.shape().len() != 2 {
            return Err(SalError::Shape("dataset inputs must be a matrix".into()));
        }
        if inputs.rows() == 0 {
            return Err(SalError::Invalid("dataset has no rows".into()));
        }
        if inputs.rows() != labels.len() {
            return Err(SalError::Shape(format!(
                "{} rows but {} labels",
                inputs.rows(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(SalError::Invalid(format!("label {bad} outside {classes} classes")));
        }
        Ok(Self {
            inputs,
            labels,
            classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn features(&self) -> usize {
        self.inputs.cols()
    }

    /// Rows selected by `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Batch {
        let d = self.features();
        let mut values = Vec::with_capacity(indices.len() * d);
        for &i in indices {
            values.extend_from_slice(self.inputs.row(i));
        }
        Batch::classes(
            Tensor::new(vec![indices.len(), d], values).expect("consistent row width"),
            indices.iter().map(|&i| self.labels[i]).collect(),
        )
    }

    pub fn as_batch(&self) -> Batch {
        Batch::classes(self.inputs.clone(), self.labels.clone())
    }

    /// Splits off the first `n_first` of the given ordering.
    pub fn split(&self, order: &[usize], n_first: usize) -> Result<(Dataset, Dataset)> {
        if n_first == 0 || n_first >= order.len() {
            return Err(SalError::Invalid(format!(
                "cannot split {} rows at {n_first}",
                order.len()
            )));
        }
        let make = |idx: &[usize]| {
            let b = self.subset(idx);
            let labels = match b.targets {
                crate::nn::Targets::Classes(l) => l,
                crate::nn::Targets::Values(_) => unreachable!(),
            };
            Dataset::new(b.inputs, labels, self.classes)
        };
        Ok((make(&order[..n_first])?, make(&order[n_first..])?))
    }
}

fn linspace_pi(m: usize, i: usize) -> f64 {
    if m <= 1 {
        0.0
    } else {
        PI * i as f64 / (m - 1) as f64
    }
}

/// Two interleaved half circles of radius 1: the upper arc
/// `(cos t, sin t)` (label 0) and the lower arc `(1 - cos t, 0.5 - sin t)`
/// (label 1), `t` evenly spaced over `[0, pi]`, plus Gaussian jitter.
pub fn gen_two_moons(n: usize, noise_std: f64, seed: u64) -> Result<Dataset> {
    if n < 2 || !n.is_multiple_of(2) {
        return Err(SalError::Invalid(format!("two moons needs an even n >= 2, got {n}")));
    }
    if !(noise_std.is_finite() && noise_std >= 0.0) {
        return Err(SalError::Invalid(format!("noise_std must be >= 0, got {noise_std}")));
    }
    let half = n / 2;
    let mut rng = SalRng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for (label, arc) in [(0usize, false), (1usize, true)] {
        for i in 0..half {
            let t = linspace_pi(half, i);
            let (x, y) = if arc {
                (1.0 - t.cos(), 0.5 - t.sin())
            } else {
                (t.cos(), t.sin())
            };
            values.push(x);
            values.push(y);
            labels.push(label);
        }
    }
    if noise_std > 0.0 {
        for v in &mut values {
            *v += noise_std * rng.sample::<f64, _>(StandardNormal);
        }
    }
    Dataset::new(Tensor::new(vec![n, 2], values)?, labels, 2)
}

/// Reads a headed, comma-separated file. Every column except `label_column`
/// is a numeric feature; labels must be non-negative integers. With
/// `standardize` each feature column is shifted and scaled to mean 0 and
/// standard deviation 1; constant columns become all zeros.
pub fn load_csv_dataset(path: &Path, label_column: &str, standardize: bool) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| SalError::Parse {
            path: path.into(),
            line: 1,
            message: format!("no column named {label_column:?}"),
        })?;
    let d = headers.len() - 1;
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let parse_err = |message: String| SalError::Parse {
            path: path.into(),
            line,
            message,
        };
        if record.len() != headers.len() {
            return Err(parse_err(format!(
                "expected {} fields, found {}",
                headers.len(),
                record.len()
            )));
        }
        for (j, field) in record.iter().enumerate() {
            if j == label_idx {
                let label: i64 = field
                    .parse()
                    .map_err(|_| parse_err(format!("label {field:?} is not an integer")))?;
                if label < 0 {
                    return Err(parse_err(format!("label {label} is negative")));
                }
                labels.push(label as usize);
            } else {
                let v: f64 = field
                    .parse()
                    .map_err(|_| parse_err(format!("feature {field:?} is not a number")))?;
                if !v.is_finite() {
                    return Err(parse_err(format!("feature {field:?} is not finite")));
                }
                values.push(v);
            }
        }
    }
    let n = labels.len();
    if n == 0 {
        return Err(SalError::Parse {
            path: path.into(),
            line: 1,
            message: "no data rows".into(),
        });
    }
    if standardize {
        standardize_columns(&mut values, d);
    }
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    Dataset::new(Tensor::new(vec![n, d], values)?, labels, classes)
}

fn csv_error(path: &Path, e: csv::Error) -> SalError {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(source) => SalError::io(path, source),
        other => SalError::Parse {
            path: path.into(),
            line,
            message: format!("{other:?}"),
        },
    }
}

pub fn standardize_columns(values: &mut [f64], cols: usize) {
    if cols == 0 {
        return;
    }
    let n = values.len() / cols;
    for j in 0..cols {
        let mean = (0..n).map(|i| values[i * cols + j]).sum::<f64>() / n as f64;
        let var = (0..n)
            .map(|i| (values[i * cols + j] - mean).powi(2))
            .sum::<f64>()
            / n as f64;
        let std = var.sqrt();
        for i in 0..n {
            let v = &mut values[i * cols + j];
            *v = if std > 0.0 { (*v - mean) / std } else { 0.0 };
        }
    }
}
