#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;

use sal_core::nn::{forward, init_mlp, loss_and_grad, Activation, Batch, LossKind, MlpSpec, OutputKind, Targets};
use sal_core::params::Tensor;
use sal_core::rng::SalRng;

/// `|a - b| / max(|a|, |b|, floor)`.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Random network and batch for draw `k`: widths, activation, output head and
/// loss vary with `k`.
pub fn random_problem(k: u64) -> (MlpSpec, sal_core::ParameterSet, Batch, LossKind) {
    let mut rng = SalRng::seed_from_u64(1000 + k);
    let depth = 2 + (k % 3) as usize;
    let mut widths: Vec<usize> = (0..depth).map(|_| rng.random_range(2..7)).collect();
    let classes = rng.random_range(2..5);
    widths.push(classes);
    let act = if k.is_multiple_of(2) { Activation::Tanh } else { Activation::Relu };
    let (out, loss) = match k % 4 {
        0 | 1 => (OutputKind::Softmax, LossKind::CrossEntropy),
        2 => (OutputKind::Identity, LossKind::Mse),
        _ => (OutputKind::Softmax, LossKind::Mse),
    };
    let spec = MlpSpec::new(widths.clone(), act, out, 77 + k).unwrap();
    // Random biases as well as weights: with zero biases a dead ReLU unit
    // feeds exactly-zero pre-activations forward, which sits on the kink.
    let mut params = init_mlp(&spec).unwrap();
    let w: Vec<f64> = params
        .flatten()
        .iter()
        .map(|x| x + 0.3 * rng.sample::<f64, _>(StandardNormal))
        .collect();
    params.assign_flat(&w).unwrap();
    let n = rng.random_range(1..9);
    let inputs: Vec<f64> = (0..n * widths[0]).map(|_| rng.sample(StandardNormal)).collect();
    let inputs = Tensor::new(vec![n, widths[0]], inputs).unwrap();
    let batch = match loss {
        LossKind::CrossEntropy => Batch::classes(inputs, (0..n).map(|_| rng.random_range(0..classes)).collect()),
        LossKind::Mse => {
            let t: Vec<f64> = (0..n * classes).map(|_| rng.sample(StandardNormal)).collect();
            Batch {
                inputs,
                targets: Targets::Values(Tensor::new(vec![n, classes], t).unwrap()),
            }
        }
    };
    (spec, params, batch, loss)
}

/// Largest relative error between the analytic gradient and central
/// differences over every parameter.
pub fn max_grad_rel_err(k: u64) -> f64 {
    let (spec, params, batch, kind) = random_problem(k);
    let (_, cache) = forward(&params, &spec, &batch.inputs).unwrap();
    let hidden = &cache.pre[..cache.pre.len() - 1];
    let nearest_kink = hidden.iter().flatten().map(|z| z.abs()).fold(f64::INFINITY, f64::min);
    assert!(nearest_kink > 1e-4, "draw {k} sits within {nearest_kink} of a kink");
    let (_, grads) = loss_and_grad(&params, &spec, &batch, kind).unwrap();
    let analytic = grads.flatten();
    let w0 = params.flatten();
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    let mut p = params.clone();
    for i in 0..w0.len() {
        let mut w = w0.clone();
        w[i] = w0[i] + h;
        p.assign_flat(&w).unwrap();
        let up = loss_and_grad(&p, &spec, &batch, kind).unwrap().0;
        w[i] = w0[i] - h;
        p.assign_flat(&w).unwrap();
        let down = loss_and_grad(&p, &spec, &batch, kind).unwrap().0;
        let numeric = (up - down) / (2.0 * h);
        worst = worst.max(rel_err(analytic[i], numeric, 1e-6));
    }
    worst
}

/// `Q diag(eigs) Q^T` for a seeded random orthogonal `Q` (Gram-Schmidt on
/// normal columns, via nalgebra's QR).
pub fn rotated_quadratic(eigs: &[f64], seed: u64) -> nalgebra::DMatrix<f64> {
    let d = eigs.len();
    let mut rng = SalRng::seed_from_u64(seed);
    let m = nalgebra::DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let q = m.qr().q();
    &q * nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(eigs)) * q.transpose()
}

/// Dense PCA oracle: eigenvectors of the centered covariance `X^T X`,
/// largest first. Returns `(projections n x k, eigenvalues)`.
pub fn pca_oracle(snapshots: &[Vec<f64>], k: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = snapshots.len();
    let p = snapshots[0].len();
    let x = nalgebra::DMatrix::from_fn(n, p, |i, j| snapshots[i][j]);
    let mean = x.row_mean();
    let xc = nalgebra::DMatrix::from_fn(n, p, |i, j| x[(i, j)] - mean[j]);
    let eig = (xc.transpose() * &xc).symmetric_eigen();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let proj = (0..n)
        .map(|i| {
            order[..k]
                .iter()
                .map(|&c| (0..p).map(|j| xc[(i, j)] * eig.eigenvectors[(j, c)]).sum())
                .collect()
        })
        .collect();
    (proj, order[..k].iter().map(|&c| eig.eigenvalues[c]).collect())
}

/// Largest per-coordinate difference after aligning each component's sign.
pub fn max_diff_up_to_sign(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let k = a[0].len();
    let mut worst: f64 = 0.0;
    for c in 0..k {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x[c] * y[c]).sum();
        let s = if dot < 0.0 { -1.0 } else { 1.0 };
        for (x, y) in a.iter().zip(b) {
            worst = worst.max((x[c] - s * y[c]).abs());
        }
    }
    worst
}

pub fn random_snapshots(n: usize, p: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = SalRng::seed_from_u64(seed);
    // Anisotropic scales keep the leading eigenvalues well separated.
    let scales: Vec<f64> = (0..p).map(|j| 1.0 / (1.0 + j as f64)).collect();
    (0..n)
        .map(|_| scales.iter().map(|s| s * rng.sample::<f64, _>(StandardNormal)).collect())
        .collect()
}
