//! Semi-synthetic blood-pressure treatment trial: patient records, a
//! cardiovascular risk model, ρ-scaled noisy rewards and a confounded offline
//! dataset for the warm start.
//!
//! Rewards are risk levels, so lower is better. Every policy-facing quantity
//! (offline outcomes, online rewards, round means) is the negated risk signal
//! so policies keep maximizing.

mod encode;
mod patient;
mod risk;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub use encode::{patient_to_context, ContextEncoder};
pub use patient::{
    ingest_csv, read_patients_csv, save_patients_csv, synth_patients, write_patients_csv,
    IngestReport, Moments, PatientRecord, PatientStats, PositiveNormal, Race, Sex, SynthOptions,
    CLINICAL_FEATURES, COLUMNS, DEMOGRAPHIC_FEATURES,
};
pub use risk::{compute_risk, surrogate_feature, table_term, RiskModel, Stratum, DIABETES_HBA1C};

use crate::deconfound::{DdlOptions, KappaRule, Mask};
use crate::error::{Error, Result};
use crate::harness::{
    aggregate_quantiles, map_in_order, offline_phase, play, render_regret_svg, save_results_csv,
    warm_starts, KappaMode, OfflineSettings, OfflineSummary, PolicyKind, QuantileTable,
    RegretTrace, SvgStyle,
};
use crate::policy::{LinearThompson, Oful, OfulConfig, Oracle, Policy, Round, VarianceMode};
use crate::rng::{self, label};
use crate::synth::{OfflineBlock, OfflineDataset};

fn default_arms() -> Vec<String> {
    vec!["NoRx".into(), "BPRx".into()]
}

fn default_rho() -> BTreeMap<String, f64> {
    [("NoRx".to_string(), 1.0), ("BPRx".to_string(), 0.4)]
        .into_iter()
        .collect()
}

fn default_noise_sd() -> f64 {
    0.1
}

fn default_z() -> Vec<String> {
    CLINICAL_FEATURES.iter().map(|s| s.to_string()).collect()
}

fn default_h() -> Vec<String> {
    DEMOGRAPHIC_FEATURES.iter().map(|s| s.to_string()).collect()
}

/// Arms, their risk multipliers, the reward noise and the Z/H split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VirtualTrialConfig {
    /// Arm order. Index `a` in policies and datasets is `arms[a]`.
    #[serde(default = "default_arms")]
    pub arms: Vec<String>,
    #[serde(default = "default_rho")]
    pub rho: BTreeMap<String, f64>,
    #[serde(default = "default_noise_sd")]
    pub noise_sd: f64,
    #[serde(default = "default_z")]
    pub z_features: Vec<String>,
    #[serde(default = "default_h")]
    pub h_features: Vec<String>,
    #[serde(default)]
    pub seed: u64,
}

impl Default for VirtualTrialConfig {
    fn default() -> Self {
        VirtualTrialConfig {
            arms: default_arms(),
            rho: default_rho(),
            noise_sd: default_noise_sd(),
            z_features: default_z(),
            h_features: default_h(),
            seed: 0,
        }
    }
}

impl VirtualTrialConfig {
    pub fn validate(&self) -> Result<()> {
        if self.arms.len() < 2 {
            return Err(Error::config("a trial needs at least two arms"));
        }
        for a in &self.arms {
            match self.rho.get(a) {
                Some(r) if *r > 0.0 && r.is_finite() => {}
                Some(_) => return Err(Error::config(format!("rho of `{a}` must be positive"))),
                None => return Err(Error::UnknownArm(a.clone())),
            }
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::config("noise_sd must be nonnegative"));
        }
        if let Some(f) = self.z_features.iter().find(|f| self.h_features.contains(f)) {
            return Err(Error::config(format!(
                "`{f}` is listed as both a Z and an H feature"
            )));
        }
        Ok(())
    }

    pub fn arm_index(&self, arm: &str) -> Result<usize> {
        self.arms
            .iter()
            .position(|a| a == arm)
            .ok_or_else(|| Error::UnknownArm(arm.to_string()))
    }

    fn rho_of(&self, arm: &str) -> Result<f64> {
        self.rho
            .get(arm)
            .copied()
            .ok_or_else(|| Error::UnknownArm(arm.to_string()))
    }
}

/// `ρ_arm · risk + ε`, ε ~ N(0, noise_sd²). This is the risk level itself,
/// not yet negated.
pub fn trial_reward(
    risk: f64,
    arm: &str,
    cfg: &VirtualTrialConfig,
    rng: &mut (impl RngCore + ?Sized),
) -> Result<f64> {
    let rho = cfg.rho_of(arm)?;
    if !(0.0..=1.0).contains(&risk) {
        return Err(Error::config(format!("risk {risk} outside [0, 1]")));
    }
    let eps: f64 = StandardNormal.sample(rng);
    Ok(rho * risk + cfg.noise_sd * eps)
}

/// How the offline data assigned treatment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum AssignmentRule {
    /// `treated` when sbp exceeds the threshold, `untreated` otherwise.
    SbpThreshold {
        threshold: f64,
        #[serde(default = "default_treated")]
        treated: String,
        #[serde(default = "default_untreated")]
        untreated: String,
    },
    /// Use each record's own `bprx` flag.
    Recorded {
        #[serde(default = "default_treated")]
        treated: String,
        #[serde(default = "default_untreated")]
        untreated: String,
    },
}

fn default_treated() -> String {
    "BPRx".into()
}

fn default_untreated() -> String {
    "NoRx".into()
}

impl Default for AssignmentRule {
    fn default() -> Self {
        AssignmentRule::SbpThreshold {
            threshold: 130.0,
            treated: default_treated(),
            untreated: default_untreated(),
        }
    }
}

impl AssignmentRule {
    pub fn assign<'a>(&'a self, p: &PatientRecord) -> &'a str {
        match self {
            AssignmentRule::SbpThreshold {
                threshold,
                treated,
                untreated,
            } => {
                if p.sbp > *threshold {
                    treated
                } else {
                    untreated
                }
            }
            AssignmentRule::Recorded { treated, untreated } => {
                if p.bprx {
                    treated
                } else {
                    untreated
                }
            }
        }
    }
}

/// Offline dataset together with the encoder fitted on the same patients.
#[derive(Debug, Clone, PartialEq)]
pub struct ClinicalOffline {
    /// `y` is the negated noisy risk signal; `Z` holds the standardized
    /// Z features.
    pub data: OfflineDataset,
    pub encoder: ContextEncoder,
}

/// Assigns every patient an arm with the confounded rule and records the
/// negated noisy outcome. Demographic H fields never enter `Z`.
pub fn build_offline_clinical(
    patients: &[PatientRecord],
    risk_model: &RiskModel,
    cfg: &VirtualTrialConfig,
    rule: &AssignmentRule,
    rng: &mut (impl RngCore + ?Sized),
) -> Result<ClinicalOffline> {
    if patients.is_empty() {
        return Err(Error::Empty("patient list"));
    }
    cfg.validate()?;
    let encoder = ContextEncoder::fit(patients, &cfg.z_features, &cfg.h_features)?;
    let mut rows: Vec<Vec<&PatientRecord>> = vec![Vec::new(); cfg.arms.len()];
    for p in patients {
        rows[cfg.arm_index(rule.assign(p))?].push(p);
    }
    if let Some(a) = rows.iter().position(Vec::is_empty) {
        return Err(Error::ArmStarvation(cfg.arms[a].clone()));
    }
    let width = encoder.p();
    let mut blocks = Vec::with_capacity(rows.len());
    for (a, members) in rows.iter().enumerate() {
        let mut z = DMatrix::zeros(members.len(), width);
        let mut y = DVector::zeros(members.len());
        for (i, p) in members.iter().enumerate() {
            for (j, v) in encoder.encode_z(p).into_iter().enumerate() {
                z[(i, j)] = v;
            }
            let risk = compute_risk(risk_model, p)?;
            y[i] = -trial_reward(risk, &cfg.arms[a], cfg, rng)?;
        }
        blocks.push(OfflineBlock { arm: a, z, y });
    }
    Ok(ClinicalOffline {
        data: OfflineDataset { blocks },
        encoder,
    })
}

/// Copy with every block's columns and outcome centered. Contexts carry no
/// intercept term, so the offline fit estimates slopes only.
pub fn center_blocks(data: &OfflineDataset) -> OfflineDataset {
    let blocks = data
        .blocks
        .iter()
        .map(|b| {
            let mut z = b.z.clone();
            for mut col in z.column_iter_mut() {
                let m = col.mean();
                col.add_scalar_mut(-m);
            }
            let y = b.y.add_scalar(-b.y.mean());
            OfflineBlock { arm: b.arm, z, y }
        })
        .collect();
    OfflineDataset { blocks }
}

fn default_policies() -> Vec<PolicyKind> {
    vec![
        PolicyKind::Dwts,
        PolicyKind::LinTsFull,
        PolicyKind::LinTsTrue,
        PolicyKind::Oracle,
    ]
}

fn default_kappa() -> f64 {
    0.01
}

fn default_offline_fraction() -> f64 {
    0.5
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("clinical")
}

/// A clinical experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClinicalConfig {
    #[serde(default)]
    pub trial: VirtualTrialConfig,
    #[serde(default)]
    pub risk_model: RiskModel,
    #[serde(default)]
    pub assignment: AssignmentRule,
    /// Share of the patient pool used offline; the rest is sampled online.
    #[serde(default = "default_offline_fraction")]
    pub offline_fraction: f64,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub n_replications: usize,
    #[serde(default = "default_policies")]
    pub policies: Vec<PolicyKind>,
    /// Selection threshold on |θ̂|.
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(default)]
    pub variance_mode: VarianceMode,
    #[serde(default)]
    pub ddl: DdlOptions,
    #[serde(default)]
    pub oful: OfulConfig,
    pub base_seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "crate::harness::default_quantiles")]
    pub quantiles: Vec<f64>,
}

impl ClinicalConfig {
    /// Desk-scale reference trial: T = 5000, 10 replications.
    pub fn desk_scale(base_seed: u64) -> Self {
        ClinicalConfig {
            trial: VirtualTrialConfig::default(),
            risk_model: RiskModel::default(),
            assignment: AssignmentRule::default(),
            offline_fraction: default_offline_fraction(),
            horizon: 5000,
            n_replications: 10,
            policies: default_policies(),
            kappa: default_kappa(),
            variance_mode: VarianceMode::default(),
            ddl: DdlOptions::default(),
            oful: OfulConfig::default(),
            base_seed,
            output_dir: default_output_dir(),
            quantiles: crate::harness::default_quantiles(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.trial.validate()?;
        self.risk_model.validate()?;
        if self.horizon == 0 || self.n_replications == 0 {
            return Err(Error::config("T and n_replications must be at least 1"));
        }
        if self.policies.is_empty() {
            return Err(Error::config("no policies configured"));
        }
        if !(self.offline_fraction > 0.0 && self.offline_fraction < 1.0) {
            return Err(Error::config("offline_fraction must lie in (0, 1)"));
        }
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return Err(Error::config("kappa must be finite and nonnegative"));
        }
        if self.quantiles.is_empty() || self.quantiles.iter().any(|q| !(0.0..=1.0).contains(q)) {
            return Err(Error::config("quantiles must be levels in [0, 1]"));
        }
        self.ddl.validate()?;
        self.oful.validate()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Everything a clinical run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct ClinicalOutcome {
    /// Indexed like `cfg.policies`, each in replication order.
    pub traces: Vec<Vec<RegretTrace>>,
    pub tables: Vec<QuantileTable>,
    pub offline: OfflineSummary,
    pub columns: Vec<String>,
    pub n_offline: usize,
    pub n_online: usize,
}

/// Compact description of a finished run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClinicalSummary {
    pub n_offline: usize,
    pub n_online: usize,
    pub kappa: f64,
    /// Selected Z columns per arm.
    pub selected: Vec<Vec<String>>,
    pub final_median: BTreeMap<String, f64>,
}

impl ClinicalOutcome {
    pub fn summary(&self) -> ClinicalSummary {
        ClinicalSummary {
            n_offline: self.n_offline,
            n_online: self.n_online,
            kappa: self.offline.kappa,
            selected: self
                .offline
                .masks
                .iter()
                .map(|m| {
                    m.indices()
                        .into_iter()
                        .map(|j| self.columns[j].clone())
                        .collect()
                })
                .collect(),
            final_median: self
                .tables
                .iter()
                .filter_map(|t| t.final_median().map(|m| (t.policy.clone(), m)))
                .collect(),
        }
    }

    pub fn final_median(&self, policy: PolicyKind) -> Option<f64> {
        self.tables
            .iter()
            .find(|t| t.policy == policy.label())
            .and_then(QuantileTable::final_median)
    }

    /// Writes `clinical_regret.csv`, `clinical_regret.svg` and
    /// `clinical_summary.json` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let csv = dir.join("clinical_regret.csv");
        save_results_csv(&self.tables, &csv)?;
        let svg = dir.join("clinical_regret.svg");
        let style = SvgStyle {
            title: "Cumulative regret, virtual clinical trial".into(),
            ..SvgStyle::default()
        };
        render_regret_svg(&self.tables, &svg, &style)?;
        let json = dir.join("clinical_summary.json");
        let text = serde_json::to_string_pretty(&self.summary())?;
        std::fs::write(&json, text + "\n").map_err(|e| Error::io(&json, e))?;
        Ok(vec![csv, svg, json])
    }
}

/// Splits the pool, runs the offline phase once and plays every policy for
/// `cfg.n_replications` trajectories of uniformly sampled online patients.
pub fn run_clinical_experiment(
    cfg: &ClinicalConfig,
    patients: &[PatientRecord],
    jobs: usize,
) -> Result<ClinicalOutcome> {
    cfg.validate()?;
    let n_offline = ((patients.len() as f64) * cfg.offline_fraction).round() as usize;
    if n_offline == 0 || n_offline >= patients.len() {
        return Err(Error::config(
            "patient pool too small to split into offline and online parts",
        ));
    }
    let mut order: Vec<usize> = (0..patients.len()).collect();
    let mut shuffle = rng::stream(cfg.base_seed, &[label::PATIENTS, 1]);
    for i in (1..order.len()).rev() {
        let j = shuffle.random_range(0..=i);
        order.swap(i, j);
    }
    let offline_patients: Vec<PatientRecord> = order[..n_offline]
        .iter()
        .map(|&i| patients[i].clone())
        .collect();
    let online: Vec<&PatientRecord> = order[n_offline..].iter().map(|&i| &patients[i]).collect();

    let built = build_offline_clinical(
        &offline_patients,
        &cfg.risk_model,
        &cfg.trial,
        &cfg.assignment,
        &mut rng::stream(cfg.base_seed, &[label::OFFLINE]),
    )?;
    let settings = OfflineSettings {
        ddl: cfg.ddl.clone(),
        alpha: 0.05,
        kappa_mode: KappaMode::Fixed(cfg.kappa),
        kappa_rule: KappaRule::Clamped,
        beta_theta: None,
    };
    let summary = offline_phase(&center_blocks(&built.data), &settings, cfg.base_seed, &[])?;
    let encoder = &built.encoder;
    let (p, q) = (encoder.p(), encoder.q());
    let starts = warm_starts(&summary, q, cfg.variance_mode)?;

    let contexts: Vec<DVector<f64>> = online.iter().map(|pt| encoder.encode(pt).x).collect();
    let rhos: Vec<f64> = cfg.trial.arms.iter().map(|a| cfg.trial.rho[a]).collect();
    let means: Vec<Vec<f64>> = online
        .iter()
        .map(|pt| {
            compute_risk(&cfg.risk_model, pt).map(|r| rhos.iter().map(|rho| -rho * r).collect())
        })
        .collect::<Result<_>>()?;
    let columns = encoder.column_names();
    let required = cfg.risk_model.required_fields();
    let true_mask = Mask::new(
        columns[..p]
            .iter()
            .map(|c| required.contains(&c.as_str()))
            .collect(),
    );
    let arms = cfg.trial.arms.len();

    let ids: Vec<u64> = (0..cfg.n_replications as u64).collect();
    let per_rep = map_in_order(&ids, jobs, |&id| -> Result<Vec<RegretTrace>> {
        let seed = rng::stream_id(&[cfg.base_seed, label::PATIENTS, id]);
        let mut pick = rng::stream(seed, &[label::CONTEXT]);
        let rounds: Vec<Round> = (0..cfg.horizon)
            .map(|_| {
                let i = pick.random_range(0..contexts.len());
                Round {
                    context: contexts[i].clone(),
                    means: means[i].clone(),
                }
            })
            .collect();
        let mut noise_rng = rng::stream(seed, &[label::NOISE]);
        let noise: Vec<f64> = (0..cfg.horizon)
            .map(|_| {
                let e: f64 = StandardNormal.sample(&mut noise_rng);
                cfg.trial.noise_sd * e
            })
            .collect();
        cfg.policies
            .iter()
            .map(|&kind| {
                let policy_rng = rng::stream(seed, &[label::POLICY, rng::label_hash(kind.label())]);
                let wrap = |e: Error| Error::Replication {
                    policy: kind.label().into(),
                    replication: id,
                    source: Box::new(e),
                };
                let mut policy: Box<dyn Policy> = match kind {
                    PolicyKind::Dwts => Box::new(
                        LinearThompson::warm(kind.label(), &starts, policy_rng).map_err(wrap)?,
                    ),
                    PolicyKind::LinTsFull => Box::new(
                        LinearThompson::cold(kind.label(), vec![Mask::all(p); arms], q, policy_rng)
                            .map_err(wrap)?,
                    ),
                    PolicyKind::LinTsTrue => Box::new(
                        LinearThompson::cold(
                            kind.label(),
                            vec![true_mask.clone(); arms],
                            q,
                            policy_rng,
                        )
                        .map_err(wrap)?,
                    ),
                    PolicyKind::Oful => {
                        Box::new(Oful::new(arms, p + q, cfg.oful.clone()).map_err(wrap)?)
                    }
                    PolicyKind::Oracle => Box::new(Oracle),
                };
                let regret = play(policy.as_mut(), &rounds, &noise).map_err(wrap)?;
                Ok(RegretTrace::from_instantaneous(kind.label(), id, regret))
            })
            .collect()
    });
    let mut traces: Vec<Vec<RegretTrace>> = cfg.policies.iter().map(|_| Vec::new()).collect();
    for rep in per_rep {
        for (k, tr) in rep?.into_iter().enumerate() {
            traces[k].push(tr);
        }
    }
    let tables = traces
        .iter()
        .map(|t| aggregate_quantiles(t, &cfg.quantiles))
        .collect::<Result<_>>()?;
    Ok(ClinicalOutcome {
        traces,
        tables,
        offline: summary,
        columns,
        n_offline,
        n_online: online.len(),
    })
}

/// Synthetic pool drawn from the survey marginals with the experiment's
/// patient stream.
pub fn synthetic_pool(n: usize, base_seed: u64) -> Result<Vec<PatientRecord>> {
    let mut r = rng::stream(base_seed, &[label::PATIENTS]);
    synth_patients(
        n,
        &PatientStats::survey_reference(),
        &SynthOptions::default(),
        &mut r,
    )
}
