use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::deconfound::{DdlOptions, KappaRule};
use crate::error::{Error, Result};
use crate::policy::{OfulConfig, VarianceMode};
use crate::synth::SemConfig;

/// Policies the harness knows how to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PolicyKind {
    #[serde(rename = "DWTS")]
    Dwts,
    #[serde(rename = "LINTS_FULL")]
    LinTsFull,
    #[serde(rename = "LINTS_TRUE")]
    LinTsTrue,
    #[serde(rename = "OFUL")]
    Oful,
    #[serde(rename = "ORACLE")]
    Oracle,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] = [
        PolicyKind::Dwts,
        PolicyKind::LinTsFull,
        PolicyKind::LinTsTrue,
        PolicyKind::Oful,
        PolicyKind::Oracle,
    ];

    pub fn label(self) -> &'static str {
        match self {
            PolicyKind::Dwts => "DWTS",
            PolicyKind::LinTsFull => "LINTS_FULL",
            PolicyKind::LinTsTrue => "LINTS_TRUE",
            PolicyKind::Oful => "OFUL",
            PolicyKind::Oracle => "ORACLE",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.label() == s)
    }
}

impl std::fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// How the selection threshold is chosen. Serialized as `"theoretical"` or
/// `{"fixed": 0.5}`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KappaMode {
    #[default]
    Theoretical,
    Fixed(f64),
}

/// A full synthetic experiment: one SEM shape, a horizon, the policies to
/// compare and the replication count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub sem: SemConfig,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub n_replications: usize,
    pub policies: Vec<PolicyKind>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub kappa_mode: KappaMode,
    pub base_seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,

    /// Measured dimensions to sweep. Empty means just `sem.p`.
    #[serde(default)]
    pub p_grid: Vec<usize>,
    /// Draw fresh θ*, φ*, Ψ* for every replication. When false every
    /// replication reuses the parameters drawn from `sem.seed`.
    #[serde(default = "default_true")]
    pub redraw_params: bool,
    /// Smallest nonzero |θ*| for the theoretical threshold. Defaults to the
    /// value read off the true parameters.
    #[serde(default)]
    pub beta_theta: Option<f64>,
    #[serde(default)]
    pub kappa_rule: KappaRule,
    #[serde(default)]
    pub variance_mode: VarianceMode,
    #[serde(default)]
    pub ddl: DdlOptions,
    #[serde(default)]
    pub oful: OfulConfig,
    #[serde(default = "default_quantiles")]
    pub quantiles: Vec<f64>,
}

fn default_alpha() -> f64 {
    0.05
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

fn default_true() -> bool {
    true
}

pub(crate) fn default_quantiles() -> Vec<f64> {
    vec![0.1, 0.5, 0.9]
}

impl ExperimentConfig {
    /// The reference synthetic protocol: two arms, q = 3,
    /// n = 1000 per arm, T = 1000, 50 replications, p over {20, 40, 100}.
    pub fn reference(base_seed: u64) -> Self {
        ExperimentConfig {
            sem: SemConfig::reference(20, base_seed),
            horizon: 1000,
            n_replications: 50,
            policies: vec![
                PolicyKind::Dwts,
                PolicyKind::LinTsFull,
                PolicyKind::LinTsTrue,
                PolicyKind::Oful,
                PolicyKind::Oracle,
            ],
            alpha: default_alpha(),
            kappa_mode: KappaMode::Theoretical,
            base_seed,
            output_dir: default_output_dir(),
            p_grid: vec![20, 40, 100],
            redraw_params: true,
            beta_theta: None,
            kappa_rule: KappaRule::Clamped,
            variance_mode: VarianceMode::default(),
            ddl: DdlOptions::default(),
            oful: OfulConfig::default(),
            quantiles: default_quantiles(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.sem.validate()?;
        if self.horizon == 0 {
            return Err(Error::config("T must be at least 1"));
        }
        if self.n_replications == 0 {
            return Err(Error::config("n_replications must be at least 1"));
        }
        if self.policies.is_empty() {
            return Err(Error::config("no policies configured"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::config("alpha must lie in (0, 1)"));
        }
        if let KappaMode::Fixed(k) = self.kappa_mode {
            if !(k >= 0.0 && k.is_finite()) {
                return Err(Error::config("fixed kappa must be finite and nonnegative"));
            }
        }
        if let Some(b) = self.beta_theta {
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::config("beta_theta must be positive"));
            }
        }
        if self.p_grid.iter().any(|&p| p < self.sem.p_eff) {
            return Err(Error::config("every p in p_grid must be at least p_eff"));
        }
        if self.quantiles.is_empty() || self.quantiles.iter().any(|q| !(0.0..=1.0).contains(q)) {
            return Err(Error::config(
                "quantiles must be a nonempty list of levels in [0, 1]",
            ));
        }
        self.ddl.validate()?;
        self.oful.validate()
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
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

    /// The dimensions this experiment sweeps.
    pub fn grid(&self) -> Vec<usize> {
        if self.p_grid.is_empty() {
            vec![self.sem.p]
        } else {
            self.p_grid.clone()
        }
    }

    /// Copy restricted to a single measured dimension.
    pub fn at_p(&self, p: usize) -> Self {
        let mut cfg = self.clone();
        cfg.sem.p = p;
        cfg.p_grid = vec![p];
        cfg
    }
}
