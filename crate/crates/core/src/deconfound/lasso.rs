use nalgebra::{DMatrix, DVector};

pub const DEFAULT_TOL: f64 = 1e-7;
pub const DEFAULT_MAX_ITER: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct LassoFit {
    pub beta: DVector<f64>,
    pub converged: bool,
    /// Coordinate sweeps performed.
    pub sweeps: usize,
}

impl LassoFit {
    pub fn support_size(&self) -> usize {
        self.beta.iter().filter(|b| **b != 0.0).count()
    }
}

#[inline]
pub fn soft_threshold(v: f64, lambda: f64) -> f64 {
    if v > lambda {
        v - lambda
    } else if v < -lambda {
        v + lambda
    } else {
        0.0
    }
}

/// Lasso in covariance form: `gram = XᵀX/n`, `xty = Xᵀy/n`.
#[derive(Debug, Clone)]
pub struct GramLasso {
    pub gram: DMatrix<f64>,
    pub xty: DVector<f64>,
}

impl GramLasso {
    pub fn from_design(x: &DMatrix<f64>, y: &DVector<f64>) -> Self {
        let n = x.nrows() as f64;
        GramLasso {
            gram: x.tr_mul(x) / n,
            xty: x.tr_mul(y) / n,
        }
    }

    pub fn dim(&self) -> usize {
        self.xty.len()
    }

    /// `max_j |X_jᵀy| / n`, the smallest penalty with an all-zero solution.
    pub fn lambda_max(&self) -> f64 {
        self.xty.amax()
    }

    /// Cyclic coordinate descent from the warm start in `beta`.
    ///
    /// Alternates full sweeps with sweeps restricted to the current nonzero
    /// set; stops once a full sweep moves no coefficient by `tol` or more.
    /// Returns `(converged, sweeps)`.
    pub fn solve(
        &self,
        lambda: f64,
        beta: &mut DVector<f64>,
        tol: f64,
        max_iter: usize,
    ) -> (bool, usize) {
        let d = self.dim();
        let mut gb = &self.gram * &*beta;
        let mut sweeps = 0;
        let update = |j: usize, beta: &mut DVector<f64>, gb: &mut DVector<f64>| -> f64 {
            let gjj = self.gram[(j, j)];
            let old = beta[j];
            let new = if gjj > 0.0 {
                soft_threshold(self.xty[j] - gb[j] + gjj * old, lambda) / gjj
            } else {
                0.0
            };
            let delta = new - old;
            if delta != 0.0 {
                beta[j] = new;
                gb.axpy(delta, &self.gram.column(j), 1.0);
            }
            delta.abs()
        };
        loop {
            let mut max_change = 0.0f64;
            for j in 0..d {
                max_change = max_change.max(update(j, beta, &mut gb));
            }
            sweeps += 1;
            if max_change < tol {
                return (true, sweeps);
            }
            if sweeps >= max_iter {
                return (false, sweeps);
            }
            let active: Vec<usize> = (0..d).filter(|&j| beta[j] != 0.0).collect();
            loop {
                let mut change = 0.0f64;
                for &j in &active {
                    change = change.max(update(j, beta, &mut gb));
                }
                sweeps += 1;
                if change < tol {
                    break;
                }
                if sweeps >= max_iter {
                    return (false, sweeps);
                }
            }
        }
    }

    pub fn fit(&self, lambda: f64, tol: f64, max_iter: usize) -> LassoFit {
        let mut beta = DVector::zeros(self.dim());
        let (converged, sweeps) = self.solve(lambda, &mut beta, tol, max_iter);
        LassoFit {
            beta,
            converged,
            sweeps,
        }
    }
}

/// Minimises `(1/2n)‖y − Xβ‖² + λ‖β‖₁` by cyclic coordinate descent with
/// soft-thresholding. Zero columns get a zero coefficient. If `max_iter`
/// sweeps pass without convergence the last iterate is returned with
/// `converged == false`.
pub fn lasso_cd(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
    tol: f64,
    max_iter: usize,
) -> LassoFit {
    assert!(lambda > 0.0, "lasso penalty must be positive");
    assert_eq!(x.nrows(), y.len(), "design and response lengths differ");
    GramLasso::from_design(x, y).fit(lambda, tol, max_iter)
}

pub fn lasso_objective(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    beta: &DVector<f64>,
    lambda: f64,
) -> f64 {
    let r = y - x * beta;
    r.norm_squared() / (2.0 * x.nrows() as f64) + lambda * beta.lp_norm(1)
}

/// Largest violation of the lasso optimality conditions.
pub fn kkt_violation(x: &DMatrix<f64>, y: &DVector<f64>, beta: &DVector<f64>, lambda: f64) -> f64 {
    let n = x.nrows() as f64;
    let grad = x.tr_mul(&(y - x * beta)) / n;
    grad.iter()
        .zip(beta.iter())
        .map(|(&g, &b)| {
            if b != 0.0 {
                (g - lambda * b.signum()).abs()
            } else {
                (g.abs() - lambda).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}
