//! Monte Carlo estimate of the expected loss under isotropic Gaussian weight
//! noise. For small `sigma` the increase over the clean loss approaches
//! `sigma^2 / 2 * tr(H)`, and is exactly that on a quadratic.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, SalError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    /// Sample standard deviation over `sqrt(n)`.
    pub std_error: f64,
    pub samples: usize,
}

/// Samples are drawn and accumulated in a fixed order, so the result is
/// bitwise reproducible for a given generator state.
pub fn expected_loss_under_noise<L, R>(
    mut loss: L,
    w: &[f64],
    sigma: f64,
    n_samples: usize,
    rng: &mut R,
) -> Result<McEstimate>
where
    L: FnMut(&[f64]) -> Result<f64>,
    R: Rng + ?Sized,
{
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(SalError::Invalid(format!("sigma must be >= 0, got {sigma}")));
    }
    if n_samples == 0 {
        return Err(SalError::Invalid("at least one sample required".into()));
    }
    if sigma == 0.0 {
        let l = loss(w)?;
        return Ok(McEstimate {
            mean: l,
            std_error: 0.0,
            samples: n_samples,
        });
    }
    // Welford accumulation.
    let mut mean = 0.0;
    let mut m2 = 0.0;
    let mut point = w.to_vec();
    for k in 0..n_samples {
        for (p, x) in point.iter_mut().zip(w) {
            *p = x + sigma * rng.sample::<f64, _>(StandardNormal);
        }
        let l = loss(&point)?;
        if !l.is_finite() {
            return Err(SalError::non_finite("perturbed loss"));
        }
        let delta = l - mean;
        mean += delta / (k + 1) as f64;
        m2 += delta * (l - mean);
    }
    let var = if n_samples > 1 {
        m2 / (n_samples - 1) as f64
    } else {
        0.0
    };
    Ok(McEstimate {
        mean,
        std_error: (var / n_samples as f64).sqrt(),
        samples: n_samples,
    })
}
