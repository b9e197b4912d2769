use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Symmetric operator that caps the singular values of a design at a
/// quantile `τ` of its positive singular values.
///
/// With `Z = U diag(d) Vᵀ`, the operator is `U diag(min(d, τ)/d) Uᵀ` on the
/// column span of `Z` and the identity on its orthogonal complement. It is
/// stored implicitly as `I − U diag(1 − min(d, τ)/d) Uᵀ`.
#[derive(Debug, Clone)]
pub struct TrimTransform {
    basis: DMatrix<f64>,
    singular_values: Vec<f64>,
    scale: Vec<f64>,
    tau: f64,
}

pub const DEFAULT_TRIM_QUANTILE: f64 = 0.5;

/// Trim transform at the median singular value.
pub fn trim_transform(z: &DMatrix<f64>) -> Result<TrimTransform> {
    TrimTransform::fit(z, DEFAULT_TRIM_QUANTILE)
}

fn check_input(z: &DMatrix<f64>, quantile: f64) -> Result<()> {
    if z.nrows() < 2 || z.ncols() < 1 {
        return Err(Error::config(
            "trim transform needs at least 2 rows and 1 column",
        ));
    }
    if !(quantile > 0.0 && quantile <= 1.0) {
        return Err(Error::config(format!(
            "trim quantile {quantile} outside (0, 1]"
        )));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::config("design contains non-finite values"));
    }
    Ok(())
}

/// `τ` is the `ceil(ρ·r)`-th smallest of the `r` positive singular values.
/// Using an order statistic instead of an interpolated median makes the
/// transform a fixed point: re-trimming a trimmed design changes nothing.
fn trim_level(values: &[f64], quantile: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let k = ((quantile * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[k - 1]
}

impl TrimTransform {
    pub fn fit(z: &DMatrix<f64>, quantile: f64) -> Result<Self> {
        check_input(z, quantile)?;
        let svd = z.clone().svd(true, false);
        let u = svd.u.expect("left singular vectors requested");
        let d_max = svd.singular_values.max();
        if d_max <= 0.0 {
            return Err(Error::DegenerateDesign);
        }
        let cutoff = d_max * z.nrows().max(z.ncols()) as f64 * f64::EPSILON;
        let keep: Vec<usize> = (0..svd.singular_values.len())
            .filter(|&i| svd.singular_values[i] > cutoff)
            .collect();
        let basis = u.select_columns(&keep);
        let singular_values: Vec<f64> = keep.iter().map(|&i| svd.singular_values[i]).collect();
        Ok(Self::assemble(basis, singular_values, quantile))
    }

    /// Same operator computed from the eigendecomposition of `ZᵀZ`.
    ///
    /// Much cheaper than a thin SVD when `n ≫ p`; accurate for designs whose
    /// condition number is far below `1/sqrt(ε)`.
    pub fn fit_from_gram(z: &DMatrix<f64>, gram: &DMatrix<f64>, quantile: f64) -> Result<Self> {
        check_input(z, quantile)?;
        let eig = gram.clone().symmetric_eigen();
        let l_max = eig.eigenvalues.max();
        if l_max <= 0.0 {
            return Err(Error::DegenerateDesign);
        }
        let cutoff = l_max * gram.nrows() as f64 * 1e-13;
        let keep: Vec<usize> = (0..eig.eigenvalues.len())
            .filter(|&i| eig.eigenvalues[i] > cutoff)
            .collect();
        let singular_values: Vec<f64> = keep.iter().map(|&i| eig.eigenvalues[i].sqrt()).collect();
        let mut v = eig.eigenvectors.select_columns(&keep);
        for (c, d) in singular_values.iter().enumerate() {
            v.column_mut(c).scale_mut(1.0 / d);
        }
        let basis = z * v;
        Ok(Self::assemble(basis, singular_values, quantile))
    }

    fn assemble(basis: DMatrix<f64>, singular_values: Vec<f64>, quantile: f64) -> Self {
        let tau = trim_level(&singular_values, quantile);
        let scale = singular_values.iter().map(|&d| d.min(tau) / d).collect();
        TrimTransform {
            basis,
            singular_values,
            scale,
            tau,
        }
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    /// Positive singular values of the source design.
    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    fn damping(&self) -> DVector<f64> {
        DVector::from_iterator(self.scale.len(), self.scale.iter().map(|s| 1.0 - s))
    }

    pub fn apply_vec(&self, v: &DVector<f64>) -> DVector<f64> {
        let coef = (self.basis.tr_mul(v)).component_mul(&self.damping());
        v - &self.basis * coef
    }

    pub fn apply(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let mut coef = self.basis.tr_mul(m);
        let damp = self.damping();
        for (mut row, s) in coef.row_iter_mut().zip(damp.iter()) {
            row *= *s;
        }
        m - &self.basis * coef
    }

    /// Explicit `n × n` matrix of the operator.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut scaled = self.basis.clone();
        for (mut col, s) in scaled.column_iter_mut().zip(self.damping().iter()) {
            col *= *s;
        }
        DMatrix::identity(n, n) - scaled * self.basis.transpose()
    }
}
