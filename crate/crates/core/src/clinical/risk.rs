use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::patient::{PatientRecord, Sex};
use crate::error::{Error, Result};

const RISK_FLOOR: f64 = 1e-6;

/// HbA1c at or above this counts as diabetes.
pub const DIABETES_HBA1C: f64 = 6.5;

/// Coefficients of one sex/race stratum of a pooled-cohort style table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stratum {
    pub baseline_survival: f64,
    #[serde(default)]
    pub mean_linear_predictor: f64,
    /// Coefficient per term name (see [`table_term`]).
    #[serde(flatten)]
    pub coefficients: BTreeMap<String, f64>,
}

/// A ten-year risk calculator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RiskModel {
    /// `sigmoid(intercept + Σ w_k f_k)` over the features of
    /// [`surrogate_feature`].
    LogisticSurrogate {
        intercept: f64,
        weights: BTreeMap<String, f64>,
    },
    /// `1 − S₀^exp(LP − mean LP)` with LP a linear predictor over log
    /// transformed inputs. Strata are keyed `sex_race` (e.g.
    /// `female_white_nh`) with `sex` alone as a fallback.
    CoefficientTable { strata: BTreeMap<String, Stratum> },
}

impl Default for RiskModel {
    fn default() -> Self {
        RiskModel::surrogate()
    }
}

/// Surrogate features: age in decades from 50, sbp in 20 mmHg steps from
/// 120, current smoking, diabetes-range HbA1c, male sex, total/HDL
/// cholesterol ratio above 4 and prior cardiovascular disease.
pub fn surrogate_feature(name: &str, p: &PatientRecord) -> Option<f64> {
    let flag = |b: bool| if b { 1.0 } else { 0.0 };
    Some(match name {
        "age_decades" => (p.age - 50.0) / 10.0,
        "sbp" => (p.sbp - 120.0) / 20.0,
        "smoker" => flag(p.tobacco_current),
        "diabetes" => flag(p.hba1c >= DIABETES_HBA1C),
        "male" => flag(p.sex == Sex::Male),
        "chol_ratio" => p.total_chol / p.hdl - 4.0,
        "cvd_history" => flag(p.cvd_history),
        _ => return None,
    })
}

/// Terms a coefficient table may use.
pub fn table_term(name: &str, p: &PatientRecord) -> Option<f64> {
    let ln_age = p.age.ln();
    let smoker = if p.tobacco_current { 1.0 } else { 0.0 };
    let treated = if p.bprx { p.sbp.ln() } else { 0.0 };
    let untreated = if p.bprx { 0.0 } else { p.sbp.ln() };
    Some(match name {
        "ln_age" => ln_age,
        "ln_age_sq" => ln_age * ln_age,
        "ln_total_chol" => p.total_chol.ln(),
        "ln_age_x_ln_total_chol" => ln_age * p.total_chol.ln(),
        "ln_hdl" => p.hdl.ln(),
        "ln_age_x_ln_hdl" => ln_age * p.hdl.ln(),
        "ln_treated_sbp" => treated,
        "ln_age_x_ln_treated_sbp" => ln_age * treated,
        "ln_untreated_sbp" => untreated,
        "ln_age_x_ln_untreated_sbp" => ln_age * untreated,
        "smoker" => smoker,
        "ln_age_x_smoker" => ln_age * smoker,
        "diabetes" => {
            if p.hba1c >= DIABETES_HBA1C {
                1.0
            } else {
                0.0
            }
        }
        _ => return None,
    })
}

/// Record fields a surrogate feature or table term reads.
fn fields_of(term: &str) -> &'static [&'static str] {
    match term {
        "age_decades" | "ln_age" | "ln_age_sq" => &["age"],
        "sbp" => &["sbp"],
        "smoker" => &["tobacco_current"],
        "ln_age_x_smoker" => &["age", "tobacco_current"],
        "diabetes" => &["hba1c"],
        "male" => &["sex"],
        "chol_ratio" => &["total_chol", "hdl"],
        "cvd_history" => &["cvd_history"],
        "ln_total_chol" => &["total_chol"],
        "ln_age_x_ln_total_chol" => &["age", "total_chol"],
        "ln_hdl" => &["hdl"],
        "ln_age_x_ln_hdl" => &["age", "hdl"],
        "ln_treated_sbp" | "ln_untreated_sbp" => &["sbp", "bprx"],
        "ln_age_x_ln_treated_sbp" | "ln_age_x_ln_untreated_sbp" => &["age", "sbp", "bprx"],
        _ => &[],
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl RiskModel {
    /// The shipped surrogate.
    pub fn surrogate() -> Self {
        let weights = [
            ("age_decades", 0.7),
            ("sbp", 0.45),
            ("smoker", 0.6),
            ("diabetes", 0.65),
            ("male", 0.3),
            ("chol_ratio", 0.15),
            ("cvd_history", 0.8),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        RiskModel::LogisticSurrogate {
            intercept: -2.3,
            weights,
        }
    }

    /// Reads a coefficient table of the form
    /// `{stratum: {term: value, ..., "baseline_survival": s0}}`.
    pub fn table_from_json(text: &str) -> Result<Self> {
        let strata: BTreeMap<String, Stratum> = serde_json::from_str(text)?;
        let model = RiskModel::CoefficientTable { strata };
        model.validate()?;
        Ok(model)
    }

    pub fn load_table(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::table_from_json(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            RiskModel::LogisticSurrogate { intercept, weights } => {
                if !intercept.is_finite() || weights.values().any(|w| !w.is_finite()) {
                    return Err(Error::config("surrogate weights must be finite"));
                }
                if let Some(k) = weights.keys().find(|k| fields_of(k).is_empty()) {
                    return Err(Error::MissingFeature(k.clone()));
                }
            }
            RiskModel::CoefficientTable { strata } => {
                if strata.is_empty() {
                    return Err(Error::config("coefficient table has no strata"));
                }
                for (name, s) in strata {
                    if !(s.baseline_survival > 0.0 && s.baseline_survival < 1.0) {
                        return Err(Error::config(format!(
                            "{name}: baseline_survival must lie in (0, 1)"
                        )));
                    }
                    if let Some(k) = s.coefficients.keys().find(|k| fields_of(k).is_empty()) {
                        return Err(Error::MissingFeature(k.clone()));
                    }
                }
            }
        }
        Ok(())
    }

    /// Record fields the model reads.
    pub fn required_fields(&self) -> Vec<&'static str> {
        let terms: Vec<&String> = match self {
            RiskModel::LogisticSurrogate { weights, .. } => weights
                .iter()
                .filter(|(_, w)| **w != 0.0)
                .map(|(k, _)| k)
                .collect(),
            RiskModel::CoefficientTable { strata } => strata
                .values()
                .flat_map(|s| {
                    s.coefficients
                        .iter()
                        .filter(|(_, w)| **w != 0.0)
                        .map(|(k, _)| k)
                })
                .collect(),
        };
        let mut fields: Vec<&'static str> = terms
            .into_iter()
            .flat_map(|t| fields_of(t).iter().copied())
            .collect();
        fields.sort_unstable();
        fields.dedup();
        fields
    }
}

/// Ten-year risk of `patient`, clamped to `[1e-6, 1 − 1e-6]`.
pub fn compute_risk(model: &RiskModel, patient: &PatientRecord) -> Result<f64> {
    let raw = match model {
        RiskModel::LogisticSurrogate { intercept, weights } => {
            let mut lp = *intercept;
            for (name, w) in weights {
                let f = surrogate_feature(name, patient)
                    .ok_or_else(|| Error::MissingFeature(name.clone()))?;
                lp += w * f;
            }
            sigmoid(lp)
        }
        RiskModel::CoefficientTable { strata } => {
            let key = format!("{}_{}", patient.sex.code(), patient.race_ethnicity.code());
            let stratum = strata
                .get(&key)
                .or_else(|| strata.get(patient.sex.code()))
                .ok_or(Error::MissingStratum(key))?;
            let mut lp = 0.0;
            for (name, c) in &stratum.coefficients {
                let t =
                    table_term(name, patient).ok_or_else(|| Error::MissingFeature(name.clone()))?;
                lp += c * t;
            }
            1.0 - stratum
                .baseline_survival
                .powf((lp - stratum.mean_linear_predictor).exp())
        }
    };
    let risk = if raw.is_nan() { 1.0 } else { raw };
    Ok(risk.clamp(RISK_FLOOR, 1.0 - RISK_FLOOR))
}
