use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::deconfound::{apply_mask, DdlEstimate, Mask};
use crate::error::{check_dim, Error, Result};

/// Gaussian belief over one arm's (reduced) parameter vector, stored as mean
/// and precision.
///
/// The information vector `B·μ` and a Cholesky factor of `B` are kept
/// alongside; rank-one updates touch all three in `O(d²)`.
#[derive(Debug, Clone)]
pub struct GaussianPosterior {
    mu: DVector<f64>,
    precision: DMatrix<f64>,
    info: DVector<f64>,
    chol: Cholesky<f64, Dyn>,
}

fn symmetry_gap(m: &DMatrix<f64>) -> f64 {
    let mut gap = 0.0f64;
    for i in 0..m.nrows() {
        for j in 0..i {
            gap = gap.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    gap
}

impl GaussianPosterior {
    pub fn new(mu: DVector<f64>, precision: DMatrix<f64>) -> Result<Self> {
        check_dim("precision rows", mu.len(), precision.nrows())?;
        check_dim("precision columns", mu.len(), precision.ncols())?;
        if mu.is_empty() {
            return Err(Error::config("posterior dimension must be at least 1"));
        }
        if symmetry_gap(&precision) > 1e-10 || precision.iter().any(|v| !v.is_finite()) {
            return Err(Error::PosteriorCorrupted { arm: 0 });
        }
        let chol = Cholesky::new(precision.clone()).ok_or(Error::PosteriorCorrupted { arm: 0 })?;
        let info = &precision * &mu;
        Ok(GaussianPosterior {
            mu,
            precision,
            info,
            chol,
        })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &DVector<f64> {
        &self.mu
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        self.chol.inverse()
    }

    /// Conjugate update with one observation `y ≈ μᵀx`:
    /// `B' = B + x xᵀ`, `μ' = B'⁻¹(B μ + x y)`.
    pub fn update(&mut self, x: &DVector<f64>, y: f64) -> Result<()> {
        check_dim("update context length", self.dim(), x.len())?;
        if x.iter().all(|v| *v == 0.0) {
            return Ok(());
        }
        if !y.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("non-finite observation in posterior update"));
        }
        self.precision.ger(1.0, x, x, 1.0);
        self.info.axpy(y, x, 1.0);
        self.chol.rank_one_update(x, 1.0);
        self.mu = self.chol.solve(&self.info);
        Ok(())
    }

    /// One draw from `N(μ, B⁻¹)`: `μ + L⁻ᵀ ξ` with `B = L Lᵀ`.
    pub fn sample(&self, rng: &mut (impl RngCore + ?Sized)) -> DVector<f64> {
        let xi = DVector::from_fn(self.dim(), |_, _| StandardNormal.sample(rng));
        let offset = self
            .chol
            .l_dirty()
            .tr_solve_lower_triangular(&xi)
            .expect("Cholesky factor has a positive diagonal");
        &self.mu + offset
    }

    pub fn snapshot(&self) -> PosteriorSnapshot {
        let d = self.dim();
        PosteriorSnapshot {
            mu: self.mu.iter().copied().collect(),
            precision: (0..d * d).map(|k| self.precision[(k / d, k % d)]).collect(),
        }
    }

    pub fn from_snapshot(s: &PosteriorSnapshot) -> Result<Self> {
        let d = s.mu.len();
        check_dim("snapshot precision entries", d * d, s.precision.len())?;
        GaussianPosterior::new(
            DVector::from_vec(s.mu.clone()),
            DMatrix::from_row_slice(d, d, &s.precision),
        )
    }
}

/// JSON checkpoint of a posterior: mean and row-major precision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSnapshot {
    pub mu: Vec<f64>,
    pub precision: Vec<f64>,
}

/// Functional form of [`GaussianPosterior::update`].
pub fn posterior_update(
    posterior: &GaussianPosterior,
    x: &DVector<f64>,
    y: f64,
) -> Result<GaussianPosterior> {
    let mut next = posterior.clone();
    next.update(x, y)?;
    Ok(next)
}

/// Standard normal prior `N(0, I_d)`.
pub fn init_cold(d: usize) -> Result<GaussianPosterior> {
    GaussianPosterior::new(DVector::zeros(d), DMatrix::identity(d, d))
}

/// What the prior covariance diagonal holds for the selected coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceMode {
    /// `σ̂` itself.
    Stderr,
    /// `σ̂²`.
    #[default]
    Variance,
}

/// Prior of one arm: offline estimates on the selected measured coordinates
/// and a standard normal prior on the `q` formerly hidden ones.
#[derive(Debug, Clone, PartialEq)]
pub struct WarmStart {
    pub mask: Mask,
    pub mu0: Vec<f64>,
    pub prior_variance_diag: Vec<f64>,
}

impl WarmStart {
    pub fn new(estimate: &DdlEstimate, mask: &Mask, q: usize, mode: VarianceMode) -> Result<Self> {
        check_dim("mask length", estimate.p(), mask.len())?;
        if let Some(j) = mask
            .indices()
            .into_iter()
            .find(|&j| !estimate.sigma_hat[j].is_finite())
        {
            return Err(Error::NonIdentifiableWarmStart(j));
        }
        let mut mu0 = apply_mask(&estimate.theta_hat, mask)?;
        let mut var: Vec<f64> = apply_mask(&estimate.sigma_hat, mask)?
            .into_iter()
            .map(|s| match mode {
                VarianceMode::Stderr => s,
                VarianceMode::Variance => s * s,
            })
            .collect();
        if var.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::config("prior variances must be positive"));
        }
        mu0.extend(std::iter::repeat_n(0.0, q));
        var.extend(std::iter::repeat_n(1.0, q));
        Ok(WarmStart {
            mask: mask.clone(),
            mu0,
            prior_variance_diag: var,
        })
    }

    pub fn posterior(&self) -> Result<GaussianPosterior> {
        let d = self.mu0.len();
        let precision = DMatrix::from_diagonal(&DVector::from_iterator(
            d,
            self.prior_variance_diag.iter().map(|v| 1.0 / v),
        ));
        GaussianPosterior::new(DVector::from_vec(self.mu0.clone()), precision)
    }
}

pub fn init_warm_start(
    estimate: &DdlEstimate,
    mask: &Mask,
    q: usize,
    mode: VarianceMode,
) -> Result<GaussianPosterior> {
    WarmStart::new(estimate, mask, q, mode)?.posterior()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;

    fn estimate(theta: Vec<f64>, sigma: Vec<f64>) -> DdlEstimate {
        DdlEstimate {
            theta_hat: theta,
            sigma_hat: sigma,
            lambda: 0.1,
            support_size: 1,
            noise_sd_hat: 1.0,
            non_identifiable: vec![],
        }
    }

    #[test]
    fn cold_prior() {
        let p = init_cold(1).unwrap();
        assert_eq!(p.mu().as_slice(), &[0.0]);
        assert_eq!(p.precision()[(0, 0)], 1.0);
        let p = init_cold(23).unwrap();
        assert_eq!(p.precision(), &DMatrix::identity(23, 23));
    }

    #[test]
    fn cold_prior_samples_have_identity_covariance() {
        let p = init_cold(4).unwrap();
        let mut r = rng::stream(1, &[]);
        let n = 100_000;
        let mut acc = DMatrix::zeros(4, 4);
        for _ in 0..n {
            let s = p.sample(&mut r);
            acc.ger(1.0, &s, &s, 1.0);
        }
        let cov = acc / n as f64;
        assert!((cov - DMatrix::identity(4, 4)).amax() < 0.03);
    }

    #[test]
    fn warm_start_cases() {
        let est = estimate(vec![2.0, 0.3, 1.5], vec![0.1, 0.5, 0.2]);
        let empty = init_warm_start(&est, &Mask::none(3), 2, VarianceMode::Variance).unwrap();
        assert_eq!(empty.mu(), &DVector::zeros(2));
        assert_eq!(empty.precision(), &DMatrix::identity(2, 2));

        let mask = Mask::new(vec![true, false, true]);
        let post = init_warm_start(&est, &mask, 1, VarianceMode::Variance).unwrap();
        assert_eq!(post.mu().as_slice(), &[2.0, 1.5, 0.0]);
        let diag: Vec<f64> = post.precision().diagonal().iter().copied().collect();
        for (a, b) in diag.iter().zip([100.0, 25.0, 1.0]) {
            assert!((a - b).abs() < 1e-9);
        }
        let literal = init_warm_start(&est, &mask, 1, VarianceMode::Stderr).unwrap();
        assert!((literal.precision()[(0, 0)] - 10.0).abs() < 1e-12);

        let ones = estimate(vec![1.0, 1.0], vec![1.0, 1.0]);
        for mode in [VarianceMode::Stderr, VarianceMode::Variance] {
            let p = init_warm_start(&ones, &Mask::all(2), 3, mode).unwrap();
            assert_eq!(p.precision(), &DMatrix::identity(5, 5));
        }
    }

    #[test]
    fn warm_start_rejects_unidentified_coordinate() {
        let est = estimate(vec![1.0, 1.0], vec![0.1, f64::INFINITY]);
        assert!(matches!(
            init_warm_start(&est, &Mask::all(2), 1, VarianceMode::Variance),
            Err(Error::NonIdentifiableWarmStart(1))
        ));
        assert!(init_warm_start(
            &est,
            &Mask::new(vec![true, false]),
            1,
            VarianceMode::Variance
        )
        .is_ok());
    }

    #[test]
    fn single_update_closed_form() {
        let mut p = init_cold(3).unwrap();
        let x = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        p.update(&x, 1.0).unwrap();
        assert_eq!(p.precision().diagonal().as_slice(), &[2.0, 1.0, 1.0]);
        assert!((p.mu() - DVector::from_vec(vec![0.5, 0.0, 0.0])).amax() < 1e-15);
        let before = p.clone();
        p.update(&DVector::zeros(3), 5.0).unwrap();
        assert_eq!(p.mu(), before.mu());
        assert_eq!(p.precision(), before.precision());
    }

    #[test]
    fn rejects_asymmetric_or_indefinite_precision() {
        let mut b = DMatrix::identity(2, 2);
        b[(0, 1)] = 0.5;
        assert!(GaussianPosterior::new(DVector::zeros(2), b).is_err());
        let neg = -DMatrix::<f64>::identity(2, 2);
        assert!(GaussianPosterior::new(DVector::zeros(2), neg).is_err());
    }

    #[test]
    fn snapshot_round_trip() {
        let mut p = init_cold(3).unwrap();
        p.update(&DVector::from_vec(vec![1.0, 2.0, -1.0]), 0.7)
            .unwrap();
        let json = serde_json::to_string(&p.snapshot()).unwrap();
        let back = GaussianPosterior::from_snapshot(&serde_json::from_str(&json).unwrap()).unwrap();
        assert!((back.mu() - p.mu()).amax() < 1e-12);
        assert_eq!(back.precision(), p.precision());
    }

    #[test]
    fn sample_mean_is_within_three_standard_errors() {
        let mut p = init_cold(3).unwrap();
        p.update(&DVector::from_vec(vec![2.0, 1.0, 0.0]), 3.0)
            .unwrap();
        p.update(&DVector::from_vec(vec![0.0, 1.0, 4.0]), -1.0)
            .unwrap();
        let mut r = rng::stream(2, &[]);
        let n = 100_000;
        let mut sum = DVector::zeros(3);
        for _ in 0..n {
            sum += p.sample(&mut r);
        }
        let mean = sum / n as f64;
        let cov = p.covariance();
        for i in 0..3 {
            assert!((mean[i] - p.mu()[i]).abs() < 3.0 * (cov[(i, i)] / n as f64).sqrt());
        }
    }

    proptest! {
        #[test]
        fn precision_grows_by_outer_product(xs in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 4), 1..15)) {
            let mut p = init_cold(4).unwrap();
            for x in xs {
                let x = DVector::from_vec(x);
                let before = p.precision().clone();
                p.update(&x, 1.0).unwrap();
                let diff = p.precision() - before - &x * x.transpose();
                prop_assert!(diff.amax() < 1e-12);
                prop_assert!(symmetry_gap(p.precision()) <= 1e-10);
            }
        }
    }
}
