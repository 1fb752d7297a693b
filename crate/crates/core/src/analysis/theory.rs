//! Fixed fixtures checking the second-order noise expansion and the
//! Hutchinson estimator against closed-form answers.

use crate::error::Result;
use crate::landscape::{LandscapeSpec, Well};
use crate::rng::substream;

use super::noise::expected_loss_under_noise;
use super::sharpness::{hutchinson_trace_fd, DEFAULT_HVP_STEP};

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureResult {
    pub name: String,
    pub measured: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl FixtureResult {
    fn new(name: String, measured: f64, expected: f64, tolerance: f64) -> Self {
        Self {
            passed: (measured - expected).abs() <= tolerance,
            name,
            measured,
            expected,
            tolerance,
        }
    }
}

/// Monte Carlo loss increase at the quadratic minimum versus
/// `sigma^2 / 2 * tr(A)`, within three standard errors.
pub fn quadratic_noise_fixture(curvature: &[f64], sigma: f64, samples: usize, seed: u64) -> Result<FixtureResult> {
    let q = LandscapeSpec::quadratic(curvature.to_vec())?;
    let w = vec![0.0; curvature.len()];
    let mut rng = substream(seed, "theory.quadratic");
    let est = expected_loss_under_noise(|x| q.loss(x), &w, sigma, samples, &mut rng)?;
    let trace: f64 = curvature.iter().sum();
    Ok(FixtureResult::new(
        format!("noise expansion, quadratic a={curvature:?} sigma={sigma}"),
        est.mean - q.loss(&w)?,
        0.5 * sigma * sigma * trace,
        3.0 * est.std_error,
    ))
}

/// Same check at the center of a single Gaussian well. The expansion is not
/// exact there: with `x = sigma^2 / width^2` the true increase is
/// `depth * (1 - (1 + x)^(-d/2))`, whose series alternates with decreasing
/// terms for `x < 1`, so the quadratic term is off by at most the quartic
/// term `depth * (d/2)(d/2 + 1)/2 * x^2`. That bound widens the tolerance.
pub fn gaussian_well_noise_fixture(
    dim: usize,
    depth: f64,
    width: f64,
    sigma: f64,
    samples: usize,
    seed: u64,
) -> Result<FixtureResult> {
    let center = vec![0.0; dim];
    let spec = LandscapeSpec::gaussian_wells(vec![Well {
        center: center.clone(),
        depth,
        width,
    }])?;
    let mut rng = substream(seed, "theory.well");
    let est = expected_loss_under_noise(|x| spec.loss(x), &center, sigma, samples, &mut rng)?;
    let trace = spec.eval(&center)?.hessian_trace;
    let x = (sigma / width).powi(2);
    let half_d = dim as f64 / 2.0;
    let quartic = depth * half_d * (half_d + 1.0) / 2.0 * x * x;
    Ok(FixtureResult::new(
        format!("noise expansion, gaussian well d={dim} width={width} sigma={sigma}"),
        est.mean - spec.loss(&center)?,
        0.5 * sigma * sigma * trace,
        3.0 * est.std_error + quartic,
    ))
}

/// Hutchinson estimate against the exact trace, within `rel_tol`.
pub fn hutchinson_fixture(
    name: &str,
    spec: &LandscapeSpec,
    at: &[f64],
    probes: usize,
    rel_tol: f64,
    seed: u64,
) -> Result<FixtureResult> {
    let exact = spec.eval(at)?.hessian_trace;
    let mut rng = substream(seed, "theory.hutchinson");
    let est = hutchinson_trace_fd(|w| spec.grad(w), at, probes, DEFAULT_HVP_STEP, &mut rng)?;
    Ok(FixtureResult::new(
        format!("hutchinson trace, {name}, {probes} probes"),
        est,
        exact,
        rel_tol * exact.abs(),
    ))
}

/// The shipped fixture set.
pub fn verify_theory(seed: u64) -> Result<Vec<FixtureResult>> {
    let q = LandscapeSpec::quadratic(vec![1.0, 2.0, 3.0])?;
    let identity = LandscapeSpec::quadratic(vec![1.0; 5])?;
    let well = LandscapeSpec::gaussian_wells(vec![Well {
        center: vec![0.0; 4],
        depth: 1.0,
        width: 0.5,
    }])?;
    Ok(vec![
        quadratic_noise_fixture(&[1.0, 2.0, 3.0], 0.1, 100_000, seed)?,
        quadratic_noise_fixture(&[0.5, 4.0, 10.0, 1.0], 0.05, 100_000, seed)?,
        gaussian_well_noise_fixture(3, 1.0, 1.0, 0.05, 100_000, seed)?,
        hutchinson_fixture("quadratic a=(1,2,3)", &q, &[0.3, -0.2, 0.1], 1000, 0.1, seed)?,
        hutchinson_fixture("identity d=5", &identity, &[0.0; 5], 1000, 0.1, seed)?,
        hutchinson_fixture("gaussian well d=4", &well, &[0.0; 4], 1000, 0.1, seed)?,
    ])
}

pub fn format_table(results: &[FixtureResult]) -> String {
    let mut out = format!(
        "{:<6} {:>14} {:>14} {:>12}  {}\n",
        "status", "measured", "expected", "tolerance", "fixture"
    );
    for r in results {
        out.push_str(&format!(
            "{:<6} {:>14.8} {:>14.8} {:>12.3e}  {}\n",
            if r.passed { "PASS" } else { "FAIL" },
            r.measured,
            r.expected,
            r.tolerance,
            r.name
        ));
    }
    out
}
