use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::patient::{PatientRecord, Race, Sex};
use crate::error::{Error, Result};
use crate::synth::OnlineContext;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Column {
    Numeric { field: String, mean: f64, sd: f64 },
    Sex,
    Race,
}

impl Column {
    fn width(&self) -> usize {
        match self {
            Column::Numeric { .. } => 1,
            Column::Sex => Sex::ALL.len(),
            Column::Race => Race::ALL.len(),
        }
    }

    fn names(&self) -> Vec<String> {
        match self {
            Column::Numeric { field, .. } => vec![field.clone()],
            Column::Sex => Sex::ALL
                .iter()
                .map(|s| format!("sex={}", s.code()))
                .collect(),
            Column::Race => Race::ALL
                .iter()
                .map(|r| format!("race_ethnicity={}", r.code()))
                .collect(),
        }
    }

    fn push(&self, p: &PatientRecord, out: &mut Vec<f64>) {
        match self {
            Column::Numeric { field, mean, sd } => {
                out.push((p.numeric(field).expect("checked at fit") - mean) / sd)
            }
            Column::Sex => out.extend(Sex::ALL.iter().map(|s| if *s == p.sex { 1.0 } else { 0.0 })),
            Column::Race => {
                out.extend(
                    Race::ALL
                        .iter()
                        .map(|r| if *r == p.race_ethnicity { 1.0 } else { 0.0 }),
                )
            }
        }
    }
}

/// Turns records into contexts `[Z; H]`: numeric fields standardized with
/// constants frozen at fit time, categorical fields one-hot in alphabetical
/// category order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextEncoder {
    z: Vec<Column>,
    h: Vec<Column>,
}

fn column(field: &str, patients: &[PatientRecord]) -> Result<Column> {
    match field {
        "sex" => Ok(Column::Sex),
        "race_ethnicity" => Ok(Column::Race),
        _ => {
            if patients[0].numeric(field).is_none() {
                return Err(Error::MissingFeature(field.to_string()));
            }
            let vals: Vec<f64> = patients
                .iter()
                .map(|p| p.numeric(field).expect("checked"))
                .collect();
            let mean = crate::stats::mean(&vals);
            let sd = if vals.len() > 1 {
                crate::stats::variance(&vals).sqrt()
            } else {
                0.0
            };
            Ok(Column::Numeric {
                field: field.to_string(),
                mean,
                sd: if sd > 0.0 && sd.is_finite() { sd } else { 1.0 },
            })
        }
    }
}

impl ContextEncoder {
    pub fn fit(
        patients: &[PatientRecord],
        z_features: &[String],
        h_features: &[String],
    ) -> Result<Self> {
        if patients.is_empty() {
            return Err(Error::Empty("patient list"));
        }
        let z = z_features
            .iter()
            .map(|f| column(f, patients))
            .collect::<Result<_>>()?;
        let h = h_features
            .iter()
            .map(|f| column(f, patients))
            .collect::<Result<_>>()?;
        Ok(ContextEncoder { z, h })
    }

    /// Width of the measured block.
    pub fn p(&self) -> usize {
        self.z.iter().map(Column::width).sum()
    }

    /// Width of the demographic block.
    pub fn q(&self) -> usize {
        self.h.iter().map(Column::width).sum()
    }

    pub fn column_names(&self) -> Vec<String> {
        self.z
            .iter()
            .chain(&self.h)
            .flat_map(Column::names)
            .collect()
    }

    pub fn encode_z(&self, p: &PatientRecord) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.p());
        for c in &self.z {
            c.push(p, &mut out);
        }
        out
    }

    pub fn encode(&self, p: &PatientRecord) -> OnlineContext {
        let mut out = self.encode_z(p);
        for c in &self.h {
            c.push(p, &mut out);
        }
        OnlineContext::new(DVector::from_vec(out), self.p())
    }
}

pub fn patient_to_context(patient: &PatientRecord, encoder: &ContextEncoder) -> OnlineContext {
    encoder.encode(patient)
}
