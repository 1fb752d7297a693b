//! Loss along a two-dimensional slice of parameter space.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;

use crate::error::{Result, SalError};
use crate::rng::SalRng;

#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceGrid {
    pub center: Vec<f64>,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
    pub range: f64,
    pub steps: usize,
    /// Grid coordinates, symmetric around zero.
    pub coords: Vec<f64>,
    /// `values[i][j] = loss(center + coords[i] d1 + coords[j] d2)`.
    pub values: Vec<Vec<f64>>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> Result<()> {
    let n = dot(v, v).sqrt();
    if !(n > 0.0 && n.is_finite()) {
        return Err(SalError::Invalid("degenerate direction".into()));
    }
    v.iter_mut().for_each(|x| *x /= n);
    Ok(())
}

/// Two random orthonormal directions (modified Gram-Schmidt, applied twice).
pub fn orthonormal_directions(dim: usize, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    if dim < 2 {
        return Err(SalError::Invalid(format!(
            "a surface needs at least two dimensions, got {dim}"
        )));
    }
    let mut rng = SalRng::seed_from_u64(seed);
    let mut d1: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let mut d2: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    normalize(&mut d1)?;
    for _ in 0..2 {
        let p = dot(&d1, &d2);
        d2.iter_mut().zip(&d1).for_each(|(b, a)| *b -= p * a);
        normalize(&mut d2)?;
    }
    Ok((d1, d2))
}

/// Symmetric grid coordinate `range * (2i - (k - 1)) / (k - 1)`; the middle
/// index maps to exactly zero.
pub fn grid_coord(range: f64, steps: usize, i: usize) -> f64 {
    let k1 = (steps - 1) as f64;
    range * (2.0 * i as f64 - k1) / k1
}

pub fn surface_grid<L>(
    mut loss: L,
    center: &[f64],
    seed: u64,
    range: f64,
    steps: usize,
) -> Result<SurfaceGrid>
where
    L: FnMut(&[f64]) -> Result<f64>,
{
    if steps < 3 || steps.is_multiple_of(2) {
        return Err(SalError::Invalid(format!(
            "surface steps must be odd and >= 3, got {steps}"
        )));
    }
    if !(range.is_finite() && range > 0.0) {
        return Err(SalError::Invalid(format!("surface range must be > 0, got {range}")));
    }
    let (d1, d2) = orthonormal_directions(center.len(), seed)?;
    let coords: Vec<f64> = (0..steps).map(|i| grid_coord(range, steps, i)).collect();
    let mut point = vec![0.0; center.len()];
    let mut values = Vec::with_capacity(steps);
    for &a in &coords {
        let mut row = Vec::with_capacity(steps);
        for &b in &coords {
            for (((p, c), x), y) in point.iter_mut().zip(center).zip(&d1).zip(&d2) {
                *p = if a == 0.0 && b == 0.0 { *c } else { c + a * x + b * y };
            }
            row.push(loss(&point)?);
        }
        values.push(row);
    }
    Ok(SurfaceGrid {
        center: center.to_vec(),
        d1,
        d2,
        range,
        steps,
        coords,
        values,
    })
}

impl SurfaceGrid {
    pub fn center_value(&self) -> f64 {
        let m = self.steps / 2;
        self.values[m][m]
    }

    /// gnuplot `splot` layout: one `alpha,beta,loss` row per cell and a blank
    /// line after each alpha block.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(
            out,
            "# alpha,beta,loss  (loss at center + alpha*d1 + beta*d2; d1,d2 orthonormal; range {}; steps {})",
            self.range, self.steps
        )?;
        for (i, a) in self.coords.iter().enumerate() {
            for (j, b) in self.coords.iter().enumerate() {
                writeln!(out, "{a},{b},{}", self.values[i][j])?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}
