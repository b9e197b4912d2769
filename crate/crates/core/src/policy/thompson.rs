use nalgebra::DVector;
use rand::RngCore;

use super::posterior::{init_cold, GaussianPosterior, WarmStart};
use super::{Policy, Round};
use crate::deconfound::Mask;
use crate::error::{check_dim, Error, Result};
use crate::rng::StreamRng;
use crate::synth::argmax;

/// Masked measured covariates followed by all hidden-feature entries.
pub fn reduce_context(x: &[f64], mask: &Mask) -> Result<DVector<f64>> {
    let p = mask.len();
    if x.len() < p {
        return Err(Error::Dimension {
            what: "context shorter than mask",
            expected: p,
            got: x.len(),
        });
    }
    let measured = x[..p]
        .iter()
        .zip(mask.selected())
        .filter(|(_, s)| **s)
        .map(|(v, _)| *v);
    let values: Vec<f64> = measured.chain(x[p..].iter().copied()).collect();
    Ok(DVector::from_vec(values))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyDecision {
    pub arm: usize,
    pub sampled_scores: Vec<f64>,
}

/// Samples one parameter vector per arm and plays the best sampled score.
pub fn ts_select(
    posteriors: &[GaussianPosterior],
    contexts: &[DVector<f64>],
    rng: &mut (impl RngCore + ?Sized),
) -> Result<PolicyDecision> {
    check_dim("context count", posteriors.len(), contexts.len())?;
    let mut scores = Vec::with_capacity(posteriors.len());
    for (post, x) in posteriors.iter().zip(contexts) {
        check_dim("reduced context length", post.dim(), x.len())?;
        let draw = post.sample(rng);
        scores.push(draw.dot(x));
    }
    let (arm, _) = argmax(&scores).ok_or(Error::Empty("posterior list"))?;
    Ok(PolicyDecision {
        arm,
        sampled_scores: scores,
    })
}

/// Linear Thompson sampling over per-arm masked contexts. Covers the
/// warm-started deconfounded policy as well as cold-start baselines.
#[derive(Debug, Clone)]
pub struct LinearThompson {
    name: String,
    masks: Vec<Mask>,
    posteriors: Vec<GaussianPosterior>,
    rng: StreamRng,
    reduced: Vec<DVector<f64>>,
}

impl LinearThompson {
    /// Standard normal prior on the masked measured plus all `q` hidden dims.
    pub fn cold(
        name: impl Into<String>,
        masks: Vec<Mask>,
        q: usize,
        rng: StreamRng,
    ) -> Result<Self> {
        let posteriors = masks
            .iter()
            .map(|m| init_cold(m.p_eff() + q))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::assemble(name.into(), masks, posteriors, rng))
    }

    pub fn warm(name: impl Into<String>, starts: &[WarmStart], rng: StreamRng) -> Result<Self> {
        let posteriors = starts
            .iter()
            .map(WarmStart::posterior)
            .collect::<Result<Vec<_>>>()?;
        let masks = starts.iter().map(|s| s.mask.clone()).collect();
        Ok(Self::assemble(name.into(), masks, posteriors, rng))
    }

    fn assemble(
        name: String,
        masks: Vec<Mask>,
        posteriors: Vec<GaussianPosterior>,
        rng: StreamRng,
    ) -> Self {
        LinearThompson {
            name,
            masks,
            posteriors,
            rng,
            reduced: Vec::new(),
        }
    }

    pub fn posteriors(&self) -> &[GaussianPosterior] {
        &self.posteriors
    }

    pub fn masks(&self) -> &[Mask] {
        &self.masks
    }

    pub fn decide(&mut self, x: &[f64]) -> Result<PolicyDecision> {
        self.reduced = self
            .masks
            .iter()
            .map(|m| reduce_context(x, m))
            .collect::<Result<_>>()?;
        ts_select(&self.posteriors, &self.reduced, &mut self.rng)
    }
}

impl Policy for LinearThompson {
    fn name(&self) -> &str {
        &self.name
    }

    fn select(&mut self, round: &Round) -> Result<usize> {
        Ok(self.decide(round.context.as_slice())?.arm)
    }

    fn observe(&mut self, arm: usize, round: &Round, reward: f64) -> Result<()> {
        let x = match self.reduced.get(arm) {
            Some(x) => x.clone(),
            None => reduce_context(round.context.as_slice(), &self.masks[arm])?,
        };
        self.posteriors[arm].update(&x, reward)
    }
}
