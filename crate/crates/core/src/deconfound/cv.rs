use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::RngCore;

use super::lasso::{GramLasso, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::error::{Error, Result};

/// Smallest penalty on the grid is `λ_max · GRID_RATIO`.
pub const GRID_RATIO: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct CvOutcome {
    pub lambda: f64,
    /// Descending penalty grid.
    pub grid: Vec<f64>,
    /// Mean held-out squared error per grid point.
    pub errors: Vec<f64>,
}

impl CvOutcome {
    pub fn selected_index(&self) -> usize {
        self.grid
            .iter()
            .position(|&l| l == self.lambda)
            .unwrap_or(0)
    }
}

/// Log-spaced grid from `lambda_max` down to `lambda_max · GRID_RATIO`.
pub fn log_grid(lambda_max: f64, size: usize) -> Vec<f64> {
    match size {
        0 => Vec::new(),
        1 => vec![lambda_max],
        _ => (0..size)
            .map(|i| lambda_max * GRID_RATIO.powf(i as f64 / (size - 1) as f64))
            .collect(),
    }
}

/// Random balanced fold label per row.
pub fn fold_assignment(n: usize, n_folds: usize, rng: &mut impl RngCore) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut folds = vec![0; n];
    for (pos, &row) in order.iter().enumerate() {
        folds[row] = pos % n_folds;
    }
    folds
}

/// k-fold cross-validated lasso penalty.
pub fn select_lambda_cv(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    n_folds: usize,
    grid_size: usize,
    rng: &mut impl RngCore,
) -> Result<CvOutcome> {
    if n_folds < 2 {
        return Err(Error::config("cross-validation needs at least 2 folds"));
    }
    if x.nrows() < n_folds {
        return Err(Error::config("fewer rows than cross-validation folds"));
    }
    if grid_size == 0 {
        return Err(Error::config("penalty grid must not be empty"));
    }
    let folds = fold_assignment(x.nrows(), n_folds, rng);
    Ok(cv_with_folds(
        x,
        y,
        &folds,
        n_folds,
        grid_size,
        DEFAULT_TOL,
        DEFAULT_MAX_ITER,
    ))
}

/// Cross-validation with a fixed fold labelling. Fold Gram matrices are
/// subtracted from the full Gram matrix, so the cost is one pass over the
/// data plus the coordinate-descent paths.
pub(crate) fn cv_with_folds(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    folds: &[usize],
    n_folds: usize,
    grid_size: usize,
    tol: f64,
    max_iter: usize,
) -> CvOutcome {
    let n = x.nrows();
    let full_gram = x.tr_mul(x);
    let full_xty = x.tr_mul(y);
    let lambda_max = full_xty.amax() / n as f64;
    if lambda_max <= 0.0 || grid_size == 1 {
        let lambda = if lambda_max > 0.0 {
            lambda_max
        } else {
            f64::EPSILON
        };
        return CvOutcome {
            lambda,
            grid: vec![lambda],
            errors: vec![f64::NAN],
        };
    }
    let grid = log_grid(lambda_max, grid_size);
    let mut sse = vec![0.0; grid.len()];
    for fold in 0..n_folds {
        let rows: Vec<usize> = (0..n).filter(|&i| folds[i] == fold).collect();
        if rows.is_empty() || rows.len() == n {
            continue;
        }
        let x_out = x.select_rows(&rows);
        let y_out = DVector::from_iterator(rows.len(), rows.iter().map(|&i| y[i]));
        let n_in = (n - rows.len()) as f64;
        let problem = GramLasso {
            gram: (&full_gram - x_out.tr_mul(&x_out)) / n_in,
            xty: (&full_xty - x_out.tr_mul(&y_out)) / n_in,
        };
        let mut beta = DVector::zeros(x.ncols());
        for (k, &lambda) in grid.iter().enumerate() {
            problem.solve(lambda, &mut beta, tol, max_iter);
            sse[k] += (&y_out - &x_out * &beta).norm_squared();
        }
    }
    let errors: Vec<f64> = sse.iter().map(|s| s / n as f64).collect();
    let best = errors
        .iter()
        .enumerate()
        .fold(0, |best, (k, &e)| if e < errors[best] { k } else { best });
    CvOutcome {
        lambda: grid[best],
        grid,
        errors,
    }
}
