//! Sharpness measures: gradient norm and randomized Hessian trace.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SalError};

pub const DEFAULT_HVP_STEP: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharpnessRecord {
    pub epoch: u64,
    pub grad_norm: f64,
    pub hutchinson_trace: Option<f64>,
    pub probes_used: usize,
}

/// Euclidean norm of the flattened gradient.
pub fn grad_norm_sharpness(grad: &[f64]) -> f64 {
    grad.iter().map(|g| g * g).sum::<f64>().sqrt()
}

/// Central-difference Hessian-vector product
/// `(grad(w + h v) - grad(w - h v)) / (2 h)`.
pub fn fd_hvp<G>(grad: &mut G, w: &[f64], v: &[f64], h: f64) -> Result<Vec<f64>>
where
    G: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    if w.len() != v.len() {
        return Err(SalError::Shape(format!(
            "point has {} values, direction has {}",
            w.len(),
            v.len()
        )));
    }
    let plus: Vec<f64> = w.iter().zip(v).map(|(x, d)| x + h * d).collect();
    let minus: Vec<f64> = w.iter().zip(v).map(|(x, d)| x - h * d).collect();
    let gp = grad(&plus)?;
    let gm = grad(&minus)?;
    Ok(gp.iter().zip(&gm).map(|(a, b)| (a - b) / (2.0 * h)).collect())
}

/// Mean of `z^T H z` over Rademacher probes `z`.
pub fn hutchinson_trace<H, R>(mut hvp: H, dim: usize, n_probes: usize, rng: &mut R) -> Result<f64>
where
    H: FnMut(&[f64]) -> Result<Vec<f64>>,
    R: Rng + ?Sized,
{
    if n_probes == 0 {
        return Err(SalError::Invalid("Hutchinson estimate needs at least one probe".into()));
    }
    let mut sum = 0.0;
    let mut z = vec![0.0; dim];
    for _ in 0..n_probes {
        for zi in z.iter_mut() {
            *zi = if rng.random::<bool>() { 1.0 } else { -1.0 };
        }
        let hz = hvp(&z)?;
        if hz.len() != dim {
            return Err(SalError::Shape(format!(
                "HVP returned {} values for dimension {dim}",
                hz.len()
            )));
        }
        let q: f64 = z.iter().zip(&hz).map(|(a, b)| a * b).sum();
        if !q.is_finite() {
            return Err(SalError::non_finite("Hessian-vector product"));
        }
        sum += q;
    }
    Ok(sum / n_probes as f64)
}

/// Hutchinson trace at `w` with finite-difference HVPs of `grad`.
pub fn hutchinson_trace_fd<G, R>(
    mut grad: G,
    w: &[f64],
    n_probes: usize,
    step: f64,
    rng: &mut R,
) -> Result<f64>
where
    G: FnMut(&[f64]) -> Result<Vec<f64>>,
    R: Rng + ?Sized,
{
    hutchinson_trace(|v| fd_hvp(&mut grad, w, v, step), w.len(), n_probes, rng)
}
