//! Independent reference computations shared by the oracle and acceptance
//! tests. Nothing here calls into the solvers under test.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

pub fn gaussian_matrix(rng: &mut ChaCha20Rng, n: usize, d: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, d, |_, _| rng.sample(StandardNormal))
}

/// A sparse-signal regression problem with a penalty between 5% and 90% of
/// the smallest penalty that zeroes every coefficient.
pub struct LassoInstance {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub lambda: f64,
}

pub fn lasso_instance(seed: u64) -> LassoInstance {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let n = rng.random_range(20..=200);
    let d = rng.random_range(2..=50);
    let mut x = gaussian_matrix(&mut rng, n, d);
    // correlated columns make the problem less trivial
    if d > 3 {
        let rho: f64 = rng.random_range(0.0..0.8);
        for i in 0..n {
            let base = x[(i, 0)];
            for j in 1..3 {
                x[(i, j)] = rho * base + (1.0 - rho * rho).sqrt() * x[(i, j)];
            }
        }
    }
    let k = rng.random_range(1..=d.min(5));
    let beta = DVector::from_fn(d, |j, _| {
        if j < k {
            rng.random_range(-3.0..3.0)
        } else {
            0.0
        }
    });
    let noise = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let y = &x * beta + noise;
    let lambda_max = (x.transpose() * &y).amax() / n as f64;
    let lambda = lambda_max * rng.random_range(0.05..0.9);
    LassoInstance { x, y, lambda }
}

pub fn objective(x: &DMatrix<f64>, y: &DVector<f64>, beta: &DVector<f64>, lambda: f64) -> f64 {
    (y - x * beta).norm_squared() / (2.0 * x.nrows() as f64)
        + lambda * beta.iter().map(|b| b.abs()).sum::<f64>()
}

/// Accelerated proximal gradient with adaptive restart, run until the
/// objective stops moving at machine precision.
pub fn proximal_gradient_lasso(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> DVector<f64> {
    let n = x.nrows() as f64;
    let d = x.ncols();
    let gram = x.transpose() * x / n;
    let xty = x.transpose() * y / n;
    let step = 1.0 / gram.symmetric_eigenvalues().max().max(1e-12);
    let prox = |v: &DVector<f64>| v.map(|t| t.signum() * (t.abs() - step * lambda).max(0.0));
    let mut beta = DVector::zeros(d);
    let mut momentum = beta.clone();
    let mut t = 1.0f64;
    let mut last = f64::INFINITY;
    for it in 0..200_000 {
        let grad = &gram * &momentum - &xty;
        let next = prox(&(&momentum - grad * step));
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        let restart = (&momentum - &next).dot(&(&next - &beta)) > 0.0;
        if restart {
            momentum = next.clone();
            t = 1.0;
        } else {
            momentum = &next + (&next - &beta) * ((t - 1.0) / t_next);
            t = t_next;
        }
        beta = next;
        if it % 200 == 199 {
            let obj = objective(x, y, &beta, lambda);
            if (last - obj).abs() <= 1e-15 * obj.abs().max(1.0) {
                break;
            }
            last = obj;
        }
    }
    beta
}

/// Closed-form Gaussian posterior mean after observing all rows at once:
/// `(B0 + XᵀX)⁻¹ (B0 μ0 + Xᵀy)`, by LU rather than Cholesky.
pub fn batch_ridge_mean(
    mu0: &DVector<f64>,
    prior_precision: &DMatrix<f64>,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
) -> DVector<f64> {
    let a = prior_precision + x.transpose() * x;
    let b = prior_precision * mu0 + x.transpose() * y;
    a.lu().solve(&b).expect("posterior precision is invertible")
}
