use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, KappaMode, PolicyKind};
use crate::deconfound::{
    build_mask, choose_kappa_theoretical, ddl_fit, DdlEstimate, DdlOptions, KappaRule, Mask,
};
use crate::error::{Error, Result};
use crate::policy::{LinearThompson, Oful, Oracle, Policy, Round, VarianceMode, WarmStart};
use crate::rng::{self, label};
use crate::synth::{
    self, argmax, draw_online_context, params_for, ArmParams, OfflineDataset, SemConfig,
};

/// Regret of one policy over one sample path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretTrace {
    pub policy: String,
    pub replication_id: u64,
    pub instantaneous: Vec<f64>,
    pub cumulative: Vec<f64>,
}

impl RegretTrace {
    pub fn from_instantaneous(
        policy: impl Into<String>,
        replication_id: u64,
        instantaneous: Vec<f64>,
    ) -> Self {
        let cumulative = instantaneous
            .iter()
            .scan(0.0, |acc, r| {
                *acc += r;
                Some(*acc)
            })
            .collect();
        RegretTrace {
            policy: policy.into(),
            replication_id,
            instantaneous,
            cumulative,
        }
    }

    pub fn horizon(&self) -> usize {
        self.instantaneous.len()
    }

    pub fn final_regret(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    /// Mean instantaneous regret over rounds `from..to` (zero-based, end
    /// exclusive).
    pub fn mean_over(&self, from: usize, to: usize) -> f64 {
        let slice = &self.instantaneous[from.min(self.horizon())..to.min(self.horizon())];
        if slice.is_empty() {
            0.0
        } else {
            slice.iter().sum::<f64>() / slice.len() as f64
        }
    }
}

/// Gap between the best arm's mean reward and the chosen arm's.
pub fn instantaneous_regret(
    all_params: &[ArmParams],
    x: &synth::OnlineContext,
    chosen_arm: usize,
) -> Result<f64> {
    let (_, best) = synth::best_arm(all_params, x)?;
    let chosen = all_params
        .get(chosen_arm)
        .ok_or_else(|| Error::UnknownArm(chosen_arm.to_string()))?;
    Ok(best - synth::mean_reward(chosen, x)?)
}

/// Plays `policy` through precomputed rounds. `noise[t]` is added to the mean
/// of whichever arm is pulled in round `t`, so every policy sees the same
/// noise sequence. Returns the per-round regret.
pub fn play(policy: &mut dyn Policy, rounds: &[Round], noise: &[f64]) -> Result<Vec<f64>> {
    if noise.len() < rounds.len() {
        return Err(Error::Dimension {
            what: "noise sequence shorter than horizon",
            expected: rounds.len(),
            got: noise.len(),
        });
    }
    let mut regret = Vec::with_capacity(rounds.len());
    for (round, eps) in rounds.iter().zip(noise) {
        let arm = policy.select(round)?;
        let mean = *round
            .means
            .get(arm)
            .ok_or_else(|| Error::UnknownArm(arm.to_string()))?;
        let (_, best) = argmax(&round.means).ok_or(Error::Empty("round means"))?;
        policy.observe(arm, round, mean + eps)?;
        regret.push((best - mean).max(0.0));
    }
    Ok(regret)
}

/// What the offline phase hands to the warm-started policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfflineSummary {
    pub estimates: Vec<DdlEstimate>,
    pub kappa: f64,
    pub masks: Vec<Mask>,
}

/// Settings of the offline phase that do not depend on the data.
#[derive(Debug, Clone, PartialEq)]
pub struct OfflineSettings {
    pub ddl: DdlOptions,
    pub alpha: f64,
    pub kappa_mode: KappaMode,
    pub kappa_rule: KappaRule,
    /// Required by the theoretical threshold.
    pub beta_theta: Option<f64>,
}

/// Debiased estimates per arm, the threshold and the resulting masks. Arm
/// `a`'s cross-validation folds are drawn from `stream(seed, path + [CV, a])`.
pub fn offline_phase(
    data: &OfflineDataset,
    settings: &OfflineSettings,
    seed: u64,
    path: &[u64],
) -> Result<OfflineSummary> {
    let mut estimates = Vec::with_capacity(data.blocks.len());
    for (a, block) in data.blocks.iter().enumerate() {
        let mut p = path.to_vec();
        p.extend([label::CROSS_VALIDATION, a as u64]);
        estimates.push(ddl_fit(
            &block.z,
            &block.y,
            &settings.ddl,
            &mut rng::stream(seed, &p),
        )?);
    }
    let kappa = match settings.kappa_mode {
        KappaMode::Fixed(k) => k,
        KappaMode::Theoretical => {
            let beta = settings
                .beta_theta
                .ok_or_else(|| Error::config("the theoretical threshold needs beta_theta"))?;
            choose_kappa_theoretical(&estimates, settings.alpha, beta, settings.kappa_rule)?
        }
    };
    let masks = estimates
        .iter()
        .map(|e| build_mask(&e.theta_hat, kappa))
        .collect();
    Ok(OfflineSummary {
        estimates,
        kappa,
        masks,
    })
}

/// Warm starts for every arm from an offline summary.
pub fn warm_starts(
    summary: &OfflineSummary,
    q: usize,
    mode: VarianceMode,
) -> Result<Vec<WarmStart>> {
    summary
        .estimates
        .iter()
        .zip(&summary.masks)
        .map(|(e, m)| WarmStart::new(e, m, q, mode))
        .collect()
}

/// Smallest nonzero |θ*| over all arms.
pub fn min_signal(params: &[ArmParams]) -> Option<f64> {
    params
        .iter()
        .flat_map(|a| a.theta_star.iter().copied())
        .map(f64::abs)
        .filter(|v| *v > 0.0)
        .min_by(f64::total_cmp)
}

/// Root seed of replication `id` in a cell of measured dimension `p`. Every
/// stream of that replication hangs off this seed.
pub fn replication_seed(base_seed: u64, p: usize, id: u64) -> u64 {
    rng::stream_id(&[base_seed, p as u64, id])
}

/// Everything a replication shares across policies: the environment, the
/// context and noise sequences and (lazily) the offline phase.
pub struct ReplicationSetup {
    pub id: u64,
    pub seed: u64,
    pub params: Vec<ArmParams>,
    pub data: OfflineDataset,
    pub rounds: Vec<Round>,
    pub noise: Vec<f64>,
    offline: Option<OfflineSummary>,
}

impl ReplicationSetup {
    pub fn new(cfg: &ExperimentConfig, id: u64) -> Result<Self> {
        let sem: &SemConfig = &cfg.sem;
        let seed = replication_seed(cfg.base_seed, sem.p, id);
        let params = if cfg.redraw_params {
            synth::build_true_params(sem, &mut rng::stream(seed, &[label::PARAMS]))?
        } else {
            params_for(sem, &[])?
        };
        let data = OfflineDataset::generate(sem, &params, seed, &[])?;

        let mut ctx_rng = rng::stream(seed, &[label::CONTEXT]);
        let mut rounds = Vec::with_capacity(cfg.horizon);
        for _ in 0..cfg.horizon {
            let x = draw_online_context(sem.p, sem.q, &mut ctx_rng);
            let means = params
                .iter()
                .map(|a| synth::mean_reward(a, &x))
                .collect::<Result<Vec<_>>>()?;
            rounds.push(Round {
                context: x.x,
                means,
            });
        }
        let mut noise_rng = rng::stream(seed, &[label::NOISE]);
        let noise = (0..cfg.horizon)
            .map(|_| {
                let e: f64 = StandardNormal.sample(&mut noise_rng);
                sem.noise_sd * e
            })
            .collect();
        Ok(ReplicationSetup {
            id,
            seed,
            params,
            data,
            rounds,
            noise,
            offline: None,
        })
    }

    /// Runs the offline phase once and caches the outcome.
    pub fn offline(&mut self, cfg: &ExperimentConfig) -> Result<&OfflineSummary> {
        if self.offline.is_none() {
            let settings = OfflineSettings {
                ddl: cfg.ddl.clone(),
                alpha: cfg.alpha,
                kappa_mode: cfg.kappa_mode,
                kappa_rule: cfg.kappa_rule,
                beta_theta: cfg.beta_theta.or_else(|| min_signal(&self.params)),
            };
            self.offline = Some(offline_phase(&self.data, &settings, self.seed, &[])?);
        }
        Ok(self.offline.as_ref().expect("just filled"))
    }

    pub fn build_policy(
        &mut self,
        cfg: &ExperimentConfig,
        kind: PolicyKind,
    ) -> Result<Box<dyn Policy>> {
        let sem = &cfg.sem;
        let policy_rng = rng::stream(self.seed, &[label::POLICY, rng::label_hash(kind.label())]);
        let policy: Box<dyn Policy> = match kind {
            PolicyKind::Dwts => {
                let summary = self.offline(cfg)?;
                let starts = warm_starts(summary, sem.q, cfg.variance_mode)?;
                Box::new(LinearThompson::warm(kind.label(), &starts, policy_rng)?)
            }
            PolicyKind::LinTsFull => Box::new(LinearThompson::cold(
                kind.label(),
                vec![Mask::all(sem.p); sem.arms],
                sem.q,
                policy_rng,
            )?),
            PolicyKind::LinTsTrue => {
                let masks = self
                    .params
                    .iter()
                    .map(|a| Mask::from_indices(sem.p, &a.support()))
                    .collect();
                Box::new(LinearThompson::cold(
                    kind.label(),
                    masks,
                    sem.q,
                    policy_rng,
                )?)
            }
            PolicyKind::Oful => Box::new(Oful::new(sem.arms, sem.p + sem.q, cfg.oful.clone())?),
            PolicyKind::Oracle => Box::new(Oracle),
        };
        Ok(policy)
    }

    /// One policy through this replication's rounds.
    pub fn run(&mut self, cfg: &ExperimentConfig, kind: PolicyKind) -> Result<RegretTrace> {
        let id = self.id;
        let wrap = |e: Error| Error::Replication {
            policy: kind.label().to_string(),
            replication: id,
            source: Box::new(e),
        };
        let mut policy = self.build_policy(cfg, kind).map_err(wrap)?;
        let regret = play(policy.as_mut(), &self.rounds, &self.noise).map_err(wrap)?;
        Ok(RegretTrace::from_instantaneous(
            kind.label(),
            self.id,
            regret,
        ))
    }
}

/// Runs one policy on replication `replication_id` of `cfg` (at `cfg.sem.p`).
/// Deterministic in (base_seed, p, replication_id, policy).
pub fn run_replication(
    cfg: &ExperimentConfig,
    policy: PolicyKind,
    replication_id: u64,
) -> Result<RegretTrace> {
    cfg.validate()?;
    ReplicationSetup::new(cfg, replication_id)?.run(cfg, policy)
}
