//! Online policies: warm-started and cold linear Thompson sampling, an OFUL
//! baseline and the oracle.

mod oful;
mod posterior;
mod thompson;

use nalgebra::DVector;

pub use oful::{oful_select, Oful, OfulArmState, OfulConfig};
pub use posterior::{
    init_cold, init_warm_start, posterior_update, GaussianPosterior, PosteriorSnapshot,
    VarianceMode, WarmStart,
};
pub use thompson::{reduce_context, ts_select, LinearThompson, PolicyDecision};

use crate::error::{Error, Result};
use crate::synth::{best_arm, ArmParams, OnlineContext};

/// One decision round.
#[derive(Debug, Clone)]
pub struct Round {
    pub context: DVector<f64>,
    /// Noise-free mean reward of every arm. Only the oracle reads it.
    pub means: Vec<f64>,
}

pub trait Policy: Send {
    fn name(&self) -> &str;
    fn select(&mut self, round: &Round) -> Result<usize>;
    fn observe(&mut self, arm: usize, round: &Round, reward: f64) -> Result<()>;
}

/// Best arm under the true parameters.
pub fn oracle_select(all_params: &[ArmParams], x: &OnlineContext) -> Result<usize> {
    Ok(best_arm(all_params, x)?.0)
}

/// Plays the arm with the highest true mean reward of the round.
#[derive(Debug, Clone, Copy, Default)]
pub struct Oracle;

impl Policy for Oracle {
    fn name(&self) -> &str {
        "ORACLE"
    }

    fn select(&mut self, round: &Round) -> Result<usize> {
        crate::synth::argmax(&round.means)
            .map(|(a, _)| a)
            .ok_or(Error::Empty("round means"))
    }

    fn observe(&mut self, _arm: usize, _round: &Round, _reward: f64) -> Result<()> {
        Ok(())
    }
}
