use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::cv::{cv_with_folds, fold_assignment};
use super::lasso::{GramLasso, DEFAULT_MAX_ITER, DEFAULT_TOL};
use super::trim::{TrimTransform, DEFAULT_TRIM_QUANTILE};
use crate::error::{check_dim, Error, Result};

/// How the lasso penalty of each regression inside the fit is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum LambdaRule {
    CrossValidation {
        folds: usize,
        grid_size: usize,
    },
    /// `λ = a · σ̂ · sqrt(2 log d / n)` with `σ̂` re-estimated once from the
    /// residuals of a first fit.
    Fixed {
        a: f64,
    },
}

impl Default for LambdaRule {
    fn default() -> Self {
        LambdaRule::CrossValidation {
            folds: 10,
            grid_size: 20,
        }
    }
}

/// Which operator weights the one-step correction of coordinate `j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Correction {
    /// `w_jᵀ Q (y − Zβ̂) / w_jᵀ Q z_j` with the outcome trim `Q`.
    #[default]
    OutcomeTrim,
    /// `w_jᵀ P_j (y − Z₋ⱼβ̂₋ⱼ) / w_jᵀ P_j z_j` with the column trim `P_j`.
    ColumnTrim,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DdlOptions {
    pub trim_quantile: f64,
    pub lambda_rule: LambdaRule,
    pub correction: Correction,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for DdlOptions {
    fn default() -> Self {
        DdlOptions {
            trim_quantile: DEFAULT_TRIM_QUANTILE,
            lambda_rule: LambdaRule::default(),
            correction: Correction::default(),
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

impl DdlOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.trim_quantile > 0.0 && self.trim_quantile <= 1.0) {
            return Err(Error::config("trim_quantile must lie in (0, 1]"));
        }
        match self.lambda_rule {
            LambdaRule::CrossValidation { folds, grid_size } if folds < 2 || grid_size == 0 => Err(
                Error::config("cross-validation needs folds >= 2 and grid_size >= 1"),
            ),
            LambdaRule::Fixed { a } if !(a > 0.0) => {
                Err(Error::config("fixed lambda rule needs a > 0"))
            }
            _ if !(self.tol > 0.0) || self.max_iter == 0 => {
                Err(Error::config("tol must be positive and max_iter nonzero"))
            }
            _ => Ok(()),
        }
    }
}

/// Per-coordinate debiased estimates and standard errors for one arm.
///
/// Coordinates that could not be identified carry `sigma_hat = +∞`, which
/// serialises as JSON `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DdlEstimate {
    pub theta_hat: Vec<f64>,
    #[serde(with = "infinite_as_null")]
    pub sigma_hat: Vec<f64>,
    pub lambda: f64,
    pub support_size: usize,
    pub noise_sd_hat: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub non_identifiable: Vec<usize>,
}

mod infinite_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|x| x.is_finite().then_some(*x)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let raw: Vec<Option<f64>> = Vec::deserialize(d)?;
        Ok(raw
            .into_iter()
            .map(|x| x.unwrap_or(f64::INFINITY))
            .collect())
    }
}

impl DdlEstimate {
    pub fn p(&self) -> usize {
        self.theta_hat.len()
    }

    /// `(lower, upper)` bounds of the two-sided interval at half-width `z·σ̂`.
    pub fn interval(&self, j: usize, z: f64) -> (f64, f64) {
        let h = z * self.sigma_hat[j];
        (self.theta_hat[j] - h, self.theta_hat[j] + h)
    }
}

struct PenalizedFit {
    beta: DVector<f64>,
    lambda: f64,
}

fn penalized_fit(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    folds: &[usize],
    opts: &DdlOptions,
) -> PenalizedFit {
    let n = x.nrows() as f64;
    let problem = GramLasso::from_design(x, y);
    match opts.lambda_rule {
        LambdaRule::CrossValidation {
            folds: k,
            grid_size,
        } => {
            let cv = cv_with_folds(x, y, folds, k, grid_size, opts.tol, opts.max_iter);
            let fit = problem.fit(cv.lambda, opts.tol, opts.max_iter);
            PenalizedFit {
                beta: fit.beta,
                lambda: cv.lambda,
            }
        }
        LambdaRule::Fixed { a } => {
            let rate = (2.0 * (x.ncols().max(2) as f64).ln() / n).sqrt();
            let mut sigma = (y.norm_squared() / n).sqrt();
            let mut lambda = (a * sigma * rate).max(f64::EPSILON);
            let mut fit = problem.fit(lambda, opts.tol, opts.max_iter);
            for _ in 0..2 {
                let dof = (n - fit.support_size() as f64).max(1.0);
                sigma = ((y - x * &fit.beta).norm_squared() / dof).sqrt();
                lambda = (a * sigma * rate).max(f64::EPSILON);
                fit = problem.fit(lambda, opts.tol, opts.max_iter);
            }
            PenalizedFit {
                beta: fit.beta,
                lambda,
            }
        }
    }
}

fn is_degenerate(col: nalgebra::DVectorView<'_, f64>) -> bool {
    let (lo, hi) = col
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    hi - lo <= 1e-12 * hi.abs().max(lo.abs()).max(1e-300)
}

/// Doubly debiased lasso fit of `y` on the measured design `z`.
///
/// 1. Trim `Z` with `Q` and fit the lasso on `(QZ, Qy)`.
/// 2. For every column `j`, trim the remaining columns with their own
///    operator `P_j`, regress `P_j z_j` on `P_j Z₋ⱼ` by lasso and keep the
///    residual direction `w_j`.
/// 3. Correct the initial coefficient along `w_j`:
///    `θ̂_j = β̂_j + w_jᵀ Q(y − Zβ̂) / w_jᵀ Q z_j`, with standard error
///    `σ̂ ‖Q w_j‖ / |w_jᵀ Q z_j|`.
///
/// Zero-variance columns get `θ̂ = 0` and `σ̂ = +∞`. A coordinate whose
/// correction denominator vanishes keeps `θ̂ = β̂_j`, gets `σ̂ = +∞` and is
/// listed in `non_identifiable`.
pub fn ddl_fit(
    z: &DMatrix<f64>,
    y: &DVector<f64>,
    opts: &DdlOptions,
    rng: &mut impl RngCore,
) -> Result<DdlEstimate> {
    opts.validate()?;
    let (n, p) = z.shape();
    check_dim("response length", n, y.len())?;
    if n <= 10 {
        return Err(Error::config(format!(
            "debiased lasso needs more than 10 rows, got {n}"
        )));
    }
    if p < 2 {
        return Err(Error::config("debiased lasso needs at least 2 columns"));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::config("response contains non-finite values"));
    }

    let active: Vec<usize> = (0..p).filter(|&j| !is_degenerate(z.column(j))).collect();
    if active.is_empty() {
        return Err(Error::DegenerateDesign);
    }
    let za = z.select_columns(&active);
    let pa = active.len();

    let folds = match opts.lambda_rule {
        LambdaRule::CrossValidation { folds, .. } => {
            if n < folds {
                return Err(Error::config("fewer rows than cross-validation folds"));
            }
            fold_assignment(n, folds, rng)
        }
        LambdaRule::Fixed { .. } => Vec::new(),
    };

    let outcome_trim = TrimTransform::fit(&za, opts.trim_quantile)?;
    let z_t = outcome_trim.apply(&za);
    let y_t = outcome_trim.apply_vec(y);
    let initial = penalized_fit(&z_t, &y_t, &folds, opts);
    let resid_t = &y_t - &z_t * &initial.beta;
    let support_size = initial.beta.iter().filter(|b| **b != 0.0).count();
    let noise_sd_hat =
        (resid_t.norm_squared() / (n.saturating_sub(support_size)).max(1) as f64).sqrt();

    let gram = za.tr_mul(&za);
    let mut theta_hat = vec![0.0; p];
    let mut sigma_hat = vec![f64::INFINITY; p];
    let mut non_identifiable = Vec::new();

    for (k, &j) in active.iter().enumerate() {
        let zj = za.column(k).into_owned();
        let mut column_trim = None;
        let w = if pa == 1 {
            zj.clone()
        } else {
            let others: Vec<usize> = (0..pa).filter(|&c| c != k).collect();
            let z_rest = za.select_columns(&others);
            let trim = if n > pa {
                let g_rest = gram.select_rows(&others).select_columns(&others);
                TrimTransform::fit_from_gram(&z_rest, &g_rest, opts.trim_quantile)?
            } else {
                TrimTransform::fit(&z_rest, opts.trim_quantile)?
            };
            let design = trim.apply(&z_rest);
            let response = trim.apply_vec(&zj);
            let nodewise = penalized_fit(&design, &response, &folds, opts);
            column_trim = Some(trim);
            response - design * nodewise.beta
        };
        let (weights, numerator) = match (opts.correction, &column_trim) {
            (Correction::ColumnTrim, Some(trim)) => {
                let mut partial = y - &za * &initial.beta;
                partial.axpy(initial.beta[k], &zj, 1.0);
                let pw = trim.apply_vec(&w);
                let num = pw.dot(&partial) - initial.beta[k] * pw.dot(&zj);
                (pw, num)
            }
            _ => (outcome_trim.apply_vec(&w), w.dot(&resid_t)),
        };
        let denom = weights.dot(&zj);
        if denom.abs() < 1e-10 {
            theta_hat[j] = initial.beta[k];
            non_identifiable.push(j);
            continue;
        }
        theta_hat[j] = initial.beta[k] + numerator / denom;
        sigma_hat[j] = noise_sd_hat * weights.norm() / denom.abs();
    }

    Ok(DdlEstimate {
        theta_hat,
        sigma_hat,
        lambda: initial.lambda,
        support_size,
        noise_sd_hat,
        non_identifiable,
    })
}
