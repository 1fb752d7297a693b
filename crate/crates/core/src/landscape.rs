//! Analytic loss landscapes with exact gradients, Hessian-vector products and
//! Hessian traces.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SalError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Well {
    pub center: Vec<f64>,
    pub depth: f64,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LandscapeSpec {
    /// `0.5 * sum(a_i w_i^2)`.
    Quadratic { curvature: Vec<f64> },
    /// `offset - sum(depth * exp(-|w - c|^2 / (2 width^2)))`, with `offset`
    /// chosen so the deepest well center sits at zero loss.
    GaussianWells { wells: Vec<Well>, offset: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LandscapeEval {
    pub loss: f64,
    pub grad: Vec<f64>,
    pub hessian_trace: f64,
}

impl LandscapeSpec {
    pub fn quadratic(curvature: Vec<f64>) -> Result<Self> {
        if curvature.is_empty() {
            return Err(SalError::Config("quadratic needs at least one dimension".into()));
        }
        if let Some(a) = curvature.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
            return Err(SalError::Config(format!(
                "quadratic curvature must be > 0, got {a}"
            )));
        }
        Ok(LandscapeSpec::Quadratic { curvature })
    }

    pub fn gaussian_wells(wells: Vec<Well>) -> Result<Self> {
        let dim = wells
            .first()
            .map(|w| w.center.len())
            .ok_or_else(|| SalError::Config("at least one well required".into()))?;
        if dim == 0 {
            return Err(SalError::Config("wells need a non-empty center".into()));
        }
        for (i, w) in wells.iter().enumerate() {
            if w.center.len() != dim {
                return Err(SalError::Config(format!(
                    "well {i} has dimension {}, expected {dim}",
                    w.center.len()
                )));
            }
            if !(w.depth.is_finite() && w.depth > 0.0) || !(w.width.is_finite() && w.width > 0.0) {
                return Err(SalError::Config(format!(
                    "well {i} needs depth > 0 and width > 0"
                )));
            }
            if w.center.iter().any(|c| !c.is_finite()) {
                return Err(SalError::Config(format!("well {i} center is not finite")));
            }
        }
        let raw_min = wells
            .iter()
            .map(|w| wells_raw(&wells, &w.center))
            .fold(f64::INFINITY, f64::min);
        Ok(LandscapeSpec::GaussianWells {
            wells,
            offset: -raw_min,
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            LandscapeSpec::Quadratic { curvature } => curvature.len(),
            LandscapeSpec::GaussianWells { wells, .. } => wells[0].center.len(),
        }
    }

    pub fn wells(&self) -> &[Well] {
        match self {
            LandscapeSpec::Quadratic { .. } => &[],
            LandscapeSpec::GaussianWells { wells, .. } => wells,
        }
    }

    fn check_dim(&self, w: &[f64]) -> Result<()> {
        if w.len() != self.dim() {
            return Err(SalError::Shape(format!(
                "point has dimension {}, landscape has {}",
                w.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    pub fn loss(&self, w: &[f64]) -> Result<f64> {
        self.check_dim(w)?;
        Ok(match self {
            LandscapeSpec::Quadratic { curvature } => {
                0.5 * curvature.iter().zip(w).map(|(a, x)| a * x * x).sum::<f64>()
            }
            LandscapeSpec::GaussianWells { wells, offset } => offset + wells_raw(wells, w),
        })
    }

    pub fn eval(&self, w: &[f64]) -> Result<LandscapeEval> {
        self.check_dim(w)?;
        let loss = self.loss(w)?;
        match self {
            LandscapeSpec::Quadratic { curvature } => Ok(LandscapeEval {
                loss,
                grad: curvature.iter().zip(w).map(|(a, x)| a * x).collect(),
                hessian_trace: curvature.iter().sum(),
            }),
            LandscapeSpec::GaussianWells { wells, .. } => {
                let d = w.len() as f64;
                let mut grad = vec![0.0; w.len()];
                let mut trace = 0.0;
                for well in wells {
                    let s2 = well.width * well.width;
                    let r2 = dist2(w, &well.center);
                    let coef = well.depth * (-r2 / (2.0 * s2)).exp() / s2;
                    for ((g, x), c) in grad.iter_mut().zip(w).zip(&well.center) {
                        *g += coef * (x - c);
                    }
                    trace += coef * (d - r2 / s2);
                }
                Ok(LandscapeEval {
                    loss,
                    grad,
                    hessian_trace: trace,
                })
            }
        }
    }

    pub fn grad(&self, w: &[f64]) -> Result<Vec<f64>> {
        Ok(self.eval(w)?.grad)
    }

    /// Exact Hessian-vector product.
    pub fn hvp(&self, w: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(w)?;
        self.check_dim(v)?;
        match self {
            LandscapeSpec::Quadratic { curvature } => {
                Ok(curvature.iter().zip(v).map(|(a, x)| a * x).collect())
            }
            LandscapeSpec::GaussianWells { wells, .. } => {
                let mut out = vec![0.0; w.len()];
                for well in wells {
                    let s2 = well.width * well.width;
                    let r: Vec<f64> = w.iter().zip(&well.center).map(|(x, c)| x - c).collect();
                    let r2: f64 = r.iter().map(|x| x * x).sum();
                    let coef = well.depth * (-r2 / (2.0 * s2)).exp() / s2;
                    let rv: f64 = r.iter().zip(v).map(|(a, b)| a * b).sum();
                    for ((o, vi), ri) in out.iter_mut().zip(v).zip(&r) {
                        *o += coef * (vi - ri * rv / s2);
                    }
                }
                Ok(out)
            }
        }
    }

    /// Index of the well whose center is closest to `w`.
    pub fn nearest_well(&self, w: &[f64]) -> Option<usize> {
        let wells = self.wells();
        (0..wells.len()).min_by(|&a, &b| {
            dist2(w, &wells[a].center)
                .partial_cmp(&dist2(w, &wells[b].center))
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn wells_raw(wells: &[Well], w: &[f64]) -> f64 {
    wells
        .iter()
        .map(|well| {
            let s2 = well.width * well.width;
            -well.depth * (-dist2(w, &well.center) / (2.0 * s2)).exp()
        })
        .sum()
}

/// Index of the sharp well in a landscape built by [`make_double_well`].
pub const SHARP_WELL: usize = 0;
/// Index of the flat well in a landscape built by [`make_double_well`].
pub const FLAT_WELL: usize = 1;

/// Two Gaussian wells on the first axis: the sharp one centered at
/// `+separation/2`, the flat one at `-separation/2`. `depths` is
/// `(sharp, flat)`.
pub fn make_double_well(
    sharp_width: f64,
    flat_width: f64,
    separation: f64,
    depths: (f64, f64),
    dim: usize,
) -> Result<LandscapeSpec> {
    if !(sharp_width > 0.0 && flat_width > 0.0) {
        return Err(SalError::Config("well widths must be > 0".into()));
    }
    if sharp_width >= flat_width {
        return Err(SalError::Config(format!(
            "sharp width {sharp_width} must be below flat width {flat_width}"
        )));
    }
    if !(separation.is_finite() && separation > 0.0) {
        return Err(SalError::Config("separation must be > 0".into()));
    }
    if dim == 0 {
        return Err(SalError::Config("dimension must be >= 1".into()));
    }
    let center = |x: f64| {
        let mut c = vec![0.0; dim];
        c[0] = x;
        c
    };
    LandscapeSpec::gaussian_wells(vec![
        Well {
            center: center(separation / 2.0),
            depth: depths.0,
            width: sharp_width,
        },
        Well {
            center: center(-separation / 2.0),
            depth: depths.1,
            width: flat_width,
        },
    ])
}
