//! Principal components of a weight trajectory.
//!
//! Snapshots are centered and the leading eigenvectors of the snapshot Gram
//! matrix `X X^T` are found one at a time by power iteration with deflation.
//! The Gram matrix is `n x n` (snapshots, not parameters), which keeps the
//! iteration cheap for long parameter vectors. A Gram eigenpair `(lambda, u)`
//! maps to the principal direction `X^T u / sqrt(lambda)` and to the
//! projected coordinates `sqrt(lambda) u`.

use crate::error::{Result, SalError};

const MAX_ITERS: usize = 200_000;
const TOL: f64 = 1e-14;
/// Components with an eigenvalue below this fraction of the total variance
/// are treated as absent.
const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct PcaProjection {
    /// `projections[i][c]`: coordinate of snapshot `i` on component `c`.
    pub projections: Vec<Vec<f64>>,
    /// Unit principal directions in parameter space.
    pub components: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    pub explained_variance_ratio: Vec<f64>,
    /// True when fewer than the requested components exist.
    pub rank_deficient: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

fn matvec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| dot(row, v)).collect()
}

/// Projects snapshots (all of equal length) onto their top `k` principal
/// components.
pub fn pca_project(snapshots: &[Vec<f64>], k: usize) -> Result<PcaProjection> {
    let n = snapshots.len();
    if k == 0 {
        return Err(SalError::Invalid("at least one component required".into()));
    }
    if n < k + 1 {
        return Err(SalError::Invalid(format!(
            "{n} snapshots are too few for {k} components"
        )));
    }
    let p = snapshots[0].len();
    if snapshots.iter().any(|s| s.len() != p) {
        return Err(SalError::Shape("snapshots differ in length".into()));
    }
    if snapshots.iter().flatten().any(|v| !v.is_finite()) {
        return Err(SalError::non_finite("trajectory snapshot"));
    }

    let mut mean = vec![0.0; p];
    for s in snapshots {
        mean.iter_mut().zip(s).for_each(|(m, x)| *m += x);
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centered: Vec<Vec<f64>> = snapshots
        .iter()
        .map(|s| s.iter().zip(&mean).map(|(x, m)| x - m).collect())
        .collect();
    let mut gram = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let g = dot(&centered[i], &centered[j]);
            gram[i][j] = g;
            gram[j][i] = g;
        }
    }
    let total: f64 = (0..n).map(|i| gram[i][i]).sum();

    let mut found_u: Vec<Vec<f64>> = Vec::new();
    let mut eigenvalues = Vec::new();
    let mut rank_deficient = false;
    for c in 0..k {
        if total <= 0.0 {
            rank_deficient = true;
            break;
        }
        // Deterministic start vector, not orthogonal to anything in general.
        let mut u: Vec<f64> = (0..n)
            .map(|i| 1.0 + ((i * 7 + c * 13) % 11) as f64 / 11.0)
            .collect();
        orthogonalize(&mut u, &found_u);
        normalize(&mut u);
        let mut lambda = 0.0;
        for _ in 0..MAX_ITERS {
            let mut next = matvec(&gram, &u);
            orthogonalize(&mut next, &found_u);
            orthogonalize(&mut next, &found_u);
            let norm = normalize(&mut next);
            if norm == 0.0 {
                lambda = 0.0;
                break;
            }
            lambda = norm;
            let diff: f64 = next.iter().zip(&u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            u = next;
            if diff < TOL {
                break;
            }
        }
        if lambda <= RANK_TOL * total {
            rank_deficient = true;
            break;
        }
        // Rayleigh quotient is more accurate than the last norm.
        lambda = dot(&u, &matvec(&gram, &u));
        eigenvalues.push(lambda);
        found_u.push(u);
    }

    let components: Vec<Vec<f64>> = found_u
        .iter()
        .zip(&eigenvalues)
        .map(|(u, &lambda)| {
            let mut v = vec![0.0; p];
            for (ui, row) in u.iter().zip(&centered) {
                v.iter_mut().zip(row).for_each(|(a, x)| *a += ui * x);
            }
            let s = lambda.sqrt();
            v.iter_mut().for_each(|a| *a /= s);
            v
        })
        .collect();
    let projections = centered
        .iter()
        .map(|row| components.iter().map(|v| dot(row, v)).collect())
        .collect();
    let explained_variance_ratio = eigenvalues.iter().map(|l| l / total).collect();
    Ok(PcaProjection {
        projections,
        components,
        eigenvalues,
        explained_variance_ratio,
        rank_deficient,
    })
}

fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
    for b in basis {
        let p = dot(v, b);
        v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
    }
}
