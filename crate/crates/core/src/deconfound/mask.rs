use serde::{Deserialize, Serialize};

use super::ddl::DdlEstimate;
use crate::error::{check_dim, Error, Result};
use crate::stats::normal_quantile;

/// Reading of the `min{β_Θ − max z·σ̂, 0}` threshold formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KappaRule {
    /// `max{β_Θ − max z·σ̂, 0}`: the nonnegative part.
    #[default]
    Clamped,
    /// `min{β_Θ − max z·σ̂, 0}` exactly as written; never positive, so it
    /// selects every coordinate.
    Literal,
}

/// Threshold from the minimum signal strength `beta_theta` and the widest
/// `(1 − α)` confidence half-width over all arms and coordinates.
///
/// Coordinates with an infinite standard error are left out of the maximum
/// (with a warning on stderr).
pub fn choose_kappa_theoretical(
    estimates: &[DdlEstimate],
    alpha: f64,
    beta_theta: f64,
    rule: KappaRule,
) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::config("alpha must lie in (0, 1)"));
    }
    if !(beta_theta > 0.0) {
        return Err(Error::config("beta_theta must be positive"));
    }
    let z = normal_quantile(1.0 - alpha / 2.0);
    let mut widest = 0.0f64;
    let mut skipped = 0;
    for est in estimates {
        for &s in &est.sigma_hat {
            if s.is_finite() {
                widest = widest.max(z * s);
            } else {
                skipped += 1;
            }
        }
    }
    if skipped > 0 {
        eprintln!(
            "warning: {skipped} non-identifiable coordinate(s) excluded from the kappa threshold"
        );
    }
    let raw = beta_theta - widest;
    Ok(match rule {
        KappaRule::Clamped => raw.max(0.0),
        KappaRule::Literal => raw.min(0.0),
    })
}

/// Selected measured coordinates. Serialises as a JSON array of booleans.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Mask {
    selected: Vec<bool>,
}

impl Mask {
    pub fn new(selected: Vec<bool>) -> Self {
        Mask { selected }
    }

    pub fn all(p: usize) -> Self {
        Mask::new(vec![true; p])
    }

    pub fn none(p: usize) -> Self {
        Mask::new(vec![false; p])
    }

    pub fn from_indices(p: usize, indices: &[usize]) -> Self {
        let mut selected = vec![false; p];
        for &i in indices {
            selected[i] = true;
        }
        Mask::new(selected)
    }

    pub fn selected(&self) -> &[bool] {
        &self.selected
    }

    /// Length of the full measured vector.
    pub fn len(&self) -> usize {
        self.selected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selected.is_empty()
    }

    pub fn p_eff(&self) -> usize {
        self.selected.iter().filter(|s| **s).count()
    }

    pub fn indices(&self) -> Vec<usize> {
        self.selected
            .iter()
            .enumerate()
            .filter(|(_, s)| **s)
            .map(|(i, _)| i)
            .collect()
    }

    /// Clears the given coordinates.
    pub fn deselect(&mut self, indices: &[usize]) {
        for &i in indices {
            if let Some(s) = self.selected.get_mut(i) {
                *s = false;
            }
        }
    }
}

pub fn build_mask(theta_hat: &[f64], kappa: f64) -> Mask {
    Mask::new(theta_hat.iter().map(|t| t.abs() >= kappa).collect())
}

/// Entries of `v` at the selected positions, in order.
pub fn apply_mask(v: &[f64], mask: &Mask) -> Result<Vec<f64>> {
    check_dim("masked vector length", mask.len(), v.len())?;
    Ok(v.iter()
        .zip(mask.selected())
        .filter(|(_, s)| **s)
        .map(|(x, _)| *x)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn estimate(sigma: Vec<f64>) -> DdlEstimate {
        DdlEstimate {
            theta_hat: vec![0.0; sigma.len()],
            sigma_hat: sigma,
            lambda: 0.1,
            support_size: 0,
            noise_sd_hat: 1.0,
            non_identifiable: vec![],
        }
    }

    #[test]
    fn kappa_limits_and_value() {
        let tiny = estimate(vec![1e-15; 4]);
        assert!(
            (choose_kappa_theoretical(&[tiny], 0.05, 2.0, KappaRule::Clamped).unwrap() - 2.0).abs()
                < 1e-12
        );
        let wide = estimate(vec![2.0, 0.1]);
        assert_eq!(
            choose_kappa_theoretical(&[wide], 0.05, 2.0, KappaRule::Clamped).unwrap(),
            0.0
        );
        let est = estimate(vec![0.05, 0.1, 0.02]);
        let k = choose_kappa_theoretical(
            &[est.clone(), estimate(vec![0.01])],
            0.05,
            2.0,
            KappaRule::Clamped,
        )
        .unwrap();
        // z_{0.975} from statrs, independent of our quantile routine.
        use statrs::distribution::{ContinuousCDF, Normal};
        let z = Normal::standard().inverse_cdf(0.975);
        assert!((k - (2.0 - z * 0.1)).abs() < 1e-12);
        assert!((k - 1.804).abs() < 5e-4);
        let lit = choose_kappa_theoretical(&[est], 0.05, 2.0, KappaRule::Literal).unwrap();
        assert_eq!(lit, 0.0);
    }

    #[test]
    fn kappa_skips_infinite_sigma() {
        let est = estimate(vec![0.1, f64::INFINITY]);
        let k = choose_kappa_theoretical(&[est], 0.05, 2.0, KappaRule::Clamped).unwrap();
        assert!(k > 1.8);
    }

    #[test]
    fn mask_cases() {
        let theta = [2.1, -0.03, 0.0, 1.9];
        assert_eq!(build_mask(&theta, 0.0).p_eff(), 4);
        assert_eq!(build_mask(&theta, 3.0).p_eff(), 0);
        let m = build_mask(&theta, 1.0);
        assert_eq!(m.selected(), &[true, false, false, true]);
        assert_eq!(m.p_eff(), 2);
    }

    #[test]
    fn apply_mask_cases() {
        let v = [5.0, 6.0, 7.0];
        assert_eq!(apply_mask(&v, &Mask::all(3)).unwrap(), v.to_vec());
        assert!(apply_mask(&v, &Mask::none(3)).unwrap().is_empty());
        assert_eq!(
            apply_mask(&v, &Mask::new(vec![true, false, true])).unwrap(),
            vec![5.0, 7.0]
        );
        assert!(apply_mask(&v, &Mask::all(2)).is_err());
    }

    #[test]
    fn mask_json_is_bool_array() {
        let m = Mask::new(vec![true, false]);
        assert_eq!(serde_json::to_string(&m).unwrap(), "[true,false]");
        assert_eq!(serde_json::from_str::<Mask>("[true,false]").unwrap(), m);
    }

    proptest! {
        #[test]
        fn mask_is_monotone_in_kappa(theta in prop::collection::vec(-5.0f64..5.0, 1..30), k1 in 0.0f64..5.0, dk in 0.0f64..5.0) {
            let loose = build_mask(&theta, k1);
            let tight = build_mask(&theta, k1 + dk);
            for (a, b) in tight.selected().iter().zip(loose.selected()) {
                prop_assert!(!a || *b);
            }
            prop_assert_eq!(loose.p_eff(), loose.indices().len());
        }
    }
}
