use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use super::{Policy, Round};
use crate::error::{check_dim, Error, Result};
use crate::synth::argmax;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OfulConfig {
    pub delta: f64,
    pub lambda_reg: f64,
    /// Bound `S` on the parameter norm.
    pub norm_bound: f64,
}

impl Default for OfulConfig {
    fn default() -> Self {
        OfulConfig {
            delta: 0.05,
            lambda_reg: 1.0,
            norm_bound: 10.0,
        }
    }
}

impl OfulConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0)
            || !(self.lambda_reg > 0.0)
            || !(self.norm_bound >= 0.0)
        {
            return Err(Error::config(
                "OFUL needs delta in (0,1), lambda_reg > 0 and norm_bound >= 0",
            ));
        }
        Ok(())
    }

    /// Confidence radius `√λ·S + sqrt(2 log(1/δ) + d log(1 + t/(λ d)))`.
    pub fn radius(&self, d: usize, t: usize) -> f64 {
        let d = d as f64;
        self.lambda_reg.sqrt() * self.norm_bound
            + (2.0 * (1.0 / self.delta).ln() + d * (1.0 + t as f64 / (self.lambda_reg * d)).ln())
                .sqrt()
    }
}

/// Ridge statistics of one arm: `V = λI + Σ x xᵀ`, `b = Σ x y`.
#[derive(Debug, Clone)]
pub struct OfulArmState {
    v: DMatrix<f64>,
    b: DVector<f64>,
    t: usize,
    chol: Cholesky<f64, Dyn>,
}

impl OfulArmState {
    pub fn new(d: usize, lambda_reg: f64) -> Self {
        let v = DMatrix::identity(d, d) * lambda_reg;
        let chol = Cholesky::new(v.clone()).expect("λI is positive definite");
        OfulArmState {
            v,
            b: DVector::zeros(d),
            t: 0,
            chol,
        }
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn pulls(&self) -> usize {
        self.t
    }

    pub fn estimate(&self) -> DVector<f64> {
        self.chol.solve(&self.b)
    }

    /// Upper confidence bound and its width for context `x`.
    pub fn ucb(&self, x: &DVector<f64>, cfg: &OfulConfig) -> (f64, f64) {
        let half = self
            .chol
            .l_dirty()
            .solve_lower_triangular(x)
            .expect("positive diagonal");
        let width = cfg.radius(x.len(), self.t) * half.norm();
        (self.estimate().dot(x) + width, width)
    }

    pub fn update(&mut self, x: &DVector<f64>, y: f64) {
        self.v.ger(1.0, x, x, 1.0);
        self.b.axpy(y, x, 1.0);
        self.chol.rank_one_update(x, 1.0);
        self.t += 1;
    }
}

/// Arm with the largest upper confidence bound (lowest index on ties) and the
/// per-arm bounds.
pub fn oful_select(
    states: &[OfulArmState],
    x: &DVector<f64>,
    cfg: &OfulConfig,
) -> Result<(usize, Vec<f64>)> {
    let mut ucbs = Vec::with_capacity(states.len());
    for s in states {
        check_dim("OFUL context length", s.b.len(), x.len())?;
        ucbs.push(s.ucb(x, cfg).0);
    }
    let (arm, _) = argmax(&ucbs).ok_or(Error::Empty("OFUL arm list"))?;
    Ok((arm, ucbs))
}

/// Optimism-in-the-face-of-uncertainty baseline on the full context.
#[derive(Debug, Clone)]
pub struct Oful {
    states: Vec<OfulArmState>,
    cfg: OfulConfig,
}

impl Oful {
    pub fn new(arms: usize, d: usize, cfg: OfulConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Oful {
            states: (0..arms)
                .map(|_| OfulArmState::new(d, cfg.lambda_reg))
                .collect(),
            cfg,
        })
    }

    pub fn states(&self) -> &[OfulArmState] {
        &self.states
    }
}

impl Policy for Oful {
    fn name(&self) -> &str {
        "OFUL"
    }

    fn select(&mut self, round: &Round) -> Result<usize> {
        Ok(oful_select(&self.states, &round.context, &self.cfg)?.0)
    }

    fn observe(&mut self, arm: usize, round: &Round, reward: f64) -> Result<()> {
        self.states[arm].update(&round.context, reward);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_identical_arms_tie_to_first() {
        let cfg = OfulConfig::default();
        let states = vec![OfulArmState::new(3, 1.0); 3];
        let x = DVector::from_vec(vec![0.2, -1.0, 0.4]);
        assert_eq!(oful_select(&states, &x, &cfg).unwrap().0, 0);
    }

    #[test]
    fn well_explored_rewarding_arm_wins() {
        let cfg = OfulConfig::default();
        let mut states = vec![OfulArmState::new(2, 1.0), OfulArmState::new(2, 1.0)];
        let x = DVector::from_vec(vec![1.0, 0.5]);
        for _ in 0..5000 {
            states[1].update(&x, 100.0);
            states[0].update(&x, -100.0);
        }
        assert_eq!(oful_select(&states, &x, &cfg).unwrap().0, 1);
    }

    #[test]
    fn ucb_dominates_point_estimate() {
        let cfg = OfulConfig::default();
        let mut s = OfulArmState::new(3, 0.5);
        let xs = [[1.0, 0.0, 2.0], [0.3, -1.0, 0.0], [0.0, 0.0, 1.0]];
        for (i, x) in xs.iter().enumerate() {
            s.update(&DVector::from_row_slice(x), i as f64);
            let probe = DVector::from_vec(vec![0.5, 0.5, -0.5]);
            let (ucb, width) = s.ucb(&probe, &cfg);
            assert!(width >= 0.0);
            assert!(ucb >= s.estimate().dot(&probe));
        }
        assert_eq!(s.pulls(), 3);
    }

    #[test]
    fn estimate_is_ridge_solution() {
        let mut s = OfulArmState::new(2, 2.0);
        let data = [([1.0, 2.0], 1.0), ([0.0, 1.0], -1.0), ([3.0, -1.0], 0.5)];
        let mut v = DMatrix::identity(2, 2) * 2.0;
        let mut b = DVector::zeros(2);
        for (x, y) in data {
            let x = DVector::from_row_slice(&x);
            s.update(&x, y);
            v += &x * x.transpose();
            b += &x * y;
        }
        let direct = v.try_inverse().unwrap() * b;
        assert!((s.estimate() - direct).amax() < 1e-12);
    }
}
