use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::normal_quantile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sex {
    Female,
    Male,
}

impl Sex {
    /// Alphabetical, which is also the one-hot order.
    pub const ALL: [Sex; 2] = [Sex::Female, Sex::Male];

    pub fn code(self) -> &'static str {
        match self {
            Sex::Female => "female",
            Sex::Male => "male",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.code() == s.trim().to_ascii_lowercase())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Race {
    BlackNh,
    Hispanic,
    Other,
    WhiteNh,
}

impl Race {
    /// Alphabetical by code, which is also the one-hot order.
    pub const ALL: [Race; 4] = [Race::BlackNh, Race::Hispanic, Race::Other, Race::WhiteNh];

    pub fn code(self) -> &'static str {
        match self {
            Race::BlackNh => "black_nh",
            Race::Hispanic => "hispanic",
            Race::Other => "other",
            Race::WhiteNh => "white_nh",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.code() == s.trim().to_ascii_lowercase())
    }
}

/// One patient, with the columns of the patient CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientRecord {
    pub age: f64,
    pub sex: Sex,
    pub race_ethnicity: Race,
    pub tobacco_current: bool,
    pub cvd_history: bool,
    pub sbp: f64,
    pub dbp: f64,
    pub bmi: f64,
    pub heart_rate: f64,
    pub hba1c: f64,
    pub total_chol: f64,
    pub hdl: f64,
    pub ldl: f64,
    pub triglycerides: f64,
    pub fasting_glucose: f64,
    pub alt: f64,
    pub potassium: f64,
    pub serum_creatinine: f64,
    pub urine_creatinine: f64,
    pub albumin_creatinine_ratio: f64,
    pub bprx: bool,
    pub statins: bool,
}

/// CSV column order.
pub const COLUMNS: [&str; 22] = [
    "age",
    "sex",
    "race_ethnicity",
    "tobacco_current",
    "cvd_history",
    "sbp",
    "dbp",
    "bmi",
    "heart_rate",
    "hba1c",
    "total_chol",
    "hdl",
    "ldl",
    "triglycerides",
    "fasting_glucose",
    "alt",
    "potassium",
    "serum_creatinine",
    "urine_creatinine",
    "albumin_creatinine_ratio",
    "bprx",
    "statins",
];

/// Clinical conditions and biomarkers: the offline covariates.
pub const CLINICAL_FEATURES: [&str; 17] = [
    "tobacco_current",
    "cvd_history",
    "sbp",
    "dbp",
    "bmi",
    "heart_rate",
    "hba1c",
    "total_chol",
    "hdl",
    "ldl",
    "triglycerides",
    "fasting_glucose",
    "alt",
    "potassium",
    "serum_creatinine",
    "urine_creatinine",
    "albumin_creatinine_ratio",
];

/// Demographics: hidden offline, observed online.
pub const DEMOGRAPHIC_FEATURES: [&str; 3] = ["age", "sex", "race_ethnicity"];

const CONTINUOUS: [&str; 16] = [
    "age",
    "sbp",
    "dbp",
    "bmi",
    "heart_rate",
    "hba1c",
    "total_chol",
    "hdl",
    "ldl",
    "triglycerides",
    "fasting_glucose",
    "alt",
    "potassium",
    "serum_creatinine",
    "urine_creatinine",
    "albumin_creatinine_ratio",
];

impl PatientRecord {
    /// Value of a numeric or boolean field (booleans as 0/1).
    pub fn numeric(&self, name: &str) -> Option<f64> {
        let b = |v: bool| if v { 1.0 } else { 0.0 };
        Some(match name {
            "age" => self.age,
            "tobacco_current" => b(self.tobacco_current),
            "cvd_history" => b(self.cvd_history),
            "sbp" => self.sbp,
            "dbp" => self.dbp,
            "bmi" => self.bmi,
            "heart_rate" => self.heart_rate,
            "hba1c" => self.hba1c,
            "total_chol" => self.total_chol,
            "hdl" => self.hdl,
            "ldl" => self.ldl,
            "triglycerides" => self.triglycerides,
            "fasting_glucose" => self.fasting_glucose,
            "alt" => self.alt,
            "potassium" => self.potassium,
            "serum_creatinine" => self.serum_creatinine,
            "urine_creatinine" => self.urine_creatinine,
            "albumin_creatinine_ratio" => self.albumin_creatinine_ratio,
            "bprx" => b(self.bprx),
            "statins" => b(self.statins),
            _ => return None,
        })
    }

    fn set_numeric(&mut self, name: &str, v: f64) {
        let slot = match name {
            "age" => &mut self.age,
            "sbp" => &mut self.sbp,
            "dbp" => &mut self.dbp,
            "bmi" => &mut self.bmi,
            "heart_rate" => &mut self.heart_rate,
            "hba1c" => &mut self.hba1c,
            "total_chol" => &mut self.total_chol,
            "hdl" => &mut self.hdl,
            "ldl" => &mut self.ldl,
            "triglycerides" => &mut self.triglycerides,
            "fasting_glucose" => &mut self.fasting_glucose,
            "alt" => &mut self.alt,
            "potassium" => &mut self.potassium,
            "serum_creatinine" => &mut self.serum_creatinine,
            "urine_creatinine" => &mut self.urine_creatinine,
            "albumin_creatinine_ratio" => &mut self.albumin_creatinine_ratio,
            _ => unreachable!("not a continuous field: {name}"),
        };
        *slot = v;
    }

    /// First violated invariant, if any.
    pub fn check(&self) -> std::result::Result<(), String> {
        for name in CONTINUOUS {
            let v = self.numeric(name).expect("known field");
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("{name} must be positive and finite (got {v})"));
            }
        }
        if self.sbp <= self.dbp {
            return Err(format!("sbp ({}) must exceed dbp ({})", self.sbp, self.dbp));
        }
        Ok(())
    }

    fn to_row(&self) -> Vec<String> {
        COLUMNS
            .iter()
            .map(|&c| match c {
                "sex" => self.sex.code().to_string(),
                "race_ethnicity" => self.race_ethnicity.code().to_string(),
                "tobacco_current" | "cvd_history" | "bprx" | "statins" => {
                    (self.numeric(c).expect("known") as u8).to_string()
                }
                _ => self.numeric(c).expect("known").to_string(),
            })
            .collect()
    }
}

pub fn write_patients_csv<W: Write>(patients: &[PatientRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COLUMNS)?;
    for p in patients {
        w.write_record(p.to_row())?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn save_patients_csv(patients: &[PatientRecord], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_patients_csv(patients, std::io::BufWriter::new(file))
}

/// Parsed records plus the rows that were turned away.
#[derive(Debug, Clone, PartialEq)]
pub struct IngestReport {
    pub records: Vec<PatientRecord>,
    /// (1-based line number, reason).
    pub rejected: Vec<(usize, String)>,
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" => Some(true),
        "0" | "false" | "no" => Some(false),
        _ => None,
    }
}

/// Reads the patient CSV. Rows that parse but break a record invariant are
/// rejected with a line-numbered reason; more than `max_reject_fraction` of
/// rejected rows, a missing column or an unparseable cell is an error.
pub fn read_patients_csv<R: Read>(
    input: R,
    source: &Path,
    max_reject_fraction: f64,
) -> Result<IngestReport> {
    let err = |message: String| Error::Parse {
        path: source.to_path_buf(),
        message,
    };
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    let mut index = Vec::with_capacity(COLUMNS.len());
    for c in COLUMNS {
        let k = header
            .iter()
            .position(|h| h.trim() == c)
            .ok_or_else(|| err(format!("missing column `{c}`")))?;
        index.push(k);
    }
    let mut records = Vec::new();
    let mut rejected = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let line = i + 2;
        let rec = rec?;
        let cell = |k: usize| rec.get(index[k]).unwrap_or("");
        let num = |k: usize| {
            cell(k).trim().parse::<f64>().map_err(|_| {
                err(format!(
                    "line {line}: cannot parse {} = `{}`",
                    COLUMNS[k],
                    cell(k)
                ))
            })
        };
        let flag = |k: usize| {
            parse_bool(cell(k)).ok_or_else(|| {
                err(format!(
                    "line {line}: cannot parse {} = `{}`",
                    COLUMNS[k],
                    cell(k)
                ))
            })
        };
        let p = PatientRecord {
            age: num(0)?,
            sex: Sex::parse(cell(1))
                .ok_or_else(|| err(format!("line {line}: unknown sex `{}`", cell(1))))?,
            race_ethnicity: Race::parse(cell(2))
                .ok_or_else(|| err(format!("line {line}: unknown race_ethnicity `{}`", cell(2))))?,
            tobacco_current: flag(3)?,
            cvd_history: flag(4)?,
            sbp: num(5)?,
            dbp: num(6)?,
            bmi: num(7)?,
            heart_rate: num(8)?,
            hba1c: num(9)?,
            total_chol: num(10)?,
            hdl: num(11)?,
            ldl: num(12)?,
            triglycerides: num(13)?,
            fasting_glucose: num(14)?,
            alt: num(15)?,
            potassium: num(16)?,
            serum_creatinine: num(17)?,
            urine_creatinine: num(18)?,
            albumin_creatinine_ratio: num(19)?,
            bprx: flag(20)?,
            statins: flag(21)?,
        };
        match p.check() {
            Ok(()) => records.push(p),
            Err(reason) => rejected.push((line, reason)),
        }
    }
    let total = records.len() + rejected.len();
    if total > 0 && rejected.len() as f64 > max_reject_fraction * total as f64 {
        return Err(err(format!(
            "{} of {total} rows rejected (first: line {}: {})",
            rejected.len(),
            rejected[0].0,
            rejected[0].1
        )));
    }
    Ok(IngestReport { records, rejected })
}

pub fn ingest_csv(path: &Path, max_reject_fraction: f64) -> Result<IngestReport> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let report = read_patients_csv(std::io::BufReader::new(file), path, max_reject_fraction)?;
    if !report.rejected.is_empty() {
        eprintln!(
            "{}: rejected {} row(s)",
            path.display(),
            report.rejected.len()
        );
        for (line, reason) in report.rejected.iter().take(5) {
            eprintln!("  line {line}: {reason}");
        }
    }
    Ok(report)
}

/// Mean and standard deviation of a continuous field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub sd: f64,
}

/// Marginal summaries the synthetic generator is calibrated to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientStats {
    /// Keyed by field name; every continuous field must be present.
    pub continuous: std::collections::BTreeMap<String, Moments>,
    pub female_rate: f64,
    /// Rates of black_nh, hispanic, other, white_nh (one-hot order).
    pub race_rates: [f64; 4],
    pub tobacco_rate: f64,
    pub cvd_rate: f64,
    pub bprx_rate: f64,
    pub statin_rate: f64,
}

impl PatientStats {
    /// Marginals of 28,409 NHANES participants (2009 to 2018).
    pub fn survey_reference() -> Self {
        let m = |mean, sd| Moments { mean, sd };
        let continuous = [
            ("age", m(45.99, 17.24)),
            ("sbp", m(122.98, 18.11)),
            ("dbp", m(70.47, 12.77)),
            ("bmi", m(29.19, 7.21)),
            ("heart_rate", m(79.64, 4.94)),
            ("hba1c", m(5.75, 1.09)),
            ("total_chol", m(189.93, 41.44)),
            ("hdl", m(52.81, 15.86)),
            ("ldl", m(114.46, 42.27)),
            ("triglycerides", m(113.61, 102.61)),
            ("fasting_glucose", m(108.29, 34.78)),
            ("alt", m(24.83, 20.05)),
            ("potassium", m(3.98, 0.34)),
            ("serum_creatinine", m(0.88, 0.44)),
            ("urine_creatinine", m(127.23, 83.75)),
            ("albumin_creatinine_ratio", m(46.96, 648.48)),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        PatientStats {
            continuous,
            female_rate: 0.5142,
            race_rates: [0.2241, 0.2632, 0.1489, 0.3638],
            tobacco_rate: 0.5205,
            cvd_rate: 0.0586,
            bprx_rate: 0.2753,
            statin_rate: 0.1648,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for name in CONTINUOUS {
            let m = self
                .continuous
                .get(name)
                .ok_or_else(|| Error::MissingFeature(name.to_string()))?;
            if !(m.mean > 0.0 && m.sd > 0.0 && m.mean.is_finite() && m.sd.is_finite()) {
                return Err(Error::config(format!(
                    "{name}: mean and sd must be positive"
                )));
            }
        }
        let rates = [
            self.female_rate,
            self.tobacco_rate,
            self.cvd_rate,
            self.bprx_rate,
            self.statin_rate,
        ];
        if rates
            .iter()
            .chain(&self.race_rates)
            .any(|r| !(0.0..=1.0).contains(r))
        {
            return Err(Error::config("rates must lie in [0, 1]"));
        }
        let total: f64 = self.race_rates.iter().sum();
        if (total - 1.0).abs() > 1e-3 {
            return Err(Error::config(format!("race rates sum to {total}, not 1")));
        }
        Ok(())
    }
}

fn upper_tail(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

fn density(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// A normal with location `mu` and scale `sigma` restricted to `x > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositiveNormal {
    pub mu: f64,
    pub sigma: f64,
}

impl PositiveNormal {
    /// Mean of the truncated law.
    pub fn mean(&self) -> f64 {
        let a = -self.mu / self.sigma;
        self.mu + self.sigma * density(a) / upper_tail(a)
    }

    /// Location whose truncated mean equals `target`, keeping `sigma`.
    pub fn calibrated(target: f64, sigma: f64) -> Self {
        let mean_at = |mu: f64| PositiveNormal { mu, sigma }.mean();
        let (mut lo, mut hi) = (target - 40.0 * sigma, target);
        while mean_at(lo) > target || !mean_at(lo).is_finite() {
            lo += 0.5 * (target - lo);
            if target - lo < 1e-12 {
                break;
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mean_at(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        PositiveNormal {
            mu: 0.5 * (lo + hi),
            sigma,
        }
    }

    /// Inverse CDF at `u` in (0, 1).
    pub fn quantile(&self, u: f64) -> f64 {
        let a = -self.mu / self.sigma;
        let tail = upper_tail(a);
        let z = if a > 0.0 {
            // far in the upper tail: work with tail probabilities
            -normal_quantile((1.0 - u) * tail)
        } else {
            normal_quantile(1.0 - tail + u * tail)
        };
        (self.mu + self.sigma * z).max(f64::MIN_POSITIVE)
    }
}

/// Options for [`synth_patients`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SynthOptions {
    /// Optional correlation of the 16 continuous fields (order: age, sbp,
    /// dbp, bmi, heart_rate, then the biomarkers as in the CSV), applied as
    /// a Gaussian copula. `None` draws them independently.
    pub correlation: Option<DMatrix<f64>>,
}

fn uniform_open(rng: &mut dyn RngCore) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// Synthetic patients whose marginals follow `stats`. Continuous fields come
/// from positive-truncated normals whose location is solved so that the
/// truncated mean matches the table; `sbp > dbp` is enforced by redrawing
/// the pair.
pub fn synth_patients(
    n: usize,
    stats: &PatientStats,
    opts: &SynthOptions,
    rng: &mut dyn RngCore,
) -> Result<Vec<PatientRecord>> {
    if n == 0 {
        return Err(Error::config("n must be at least 1"));
    }
    stats.validate()?;
    let laws: Vec<PositiveNormal> = CONTINUOUS
        .iter()
        .map(|c| {
            let m = stats.continuous[*c];
            PositiveNormal::calibrated(m.mean, m.sd)
        })
        .collect();
    let chol = match &opts.correlation {
        Some(c) => {
            crate::error::check_dim("correlation size", CONTINUOUS.len(), c.nrows())?;
            Some(
                c.clone()
                    .cholesky()
                    .ok_or_else(|| Error::config("correlation matrix is not positive definite"))?
                    .l(),
            )
        }
        None => None,
    };
    let sbp_k = CONTINUOUS.iter().position(|c| *c == "sbp").expect("listed");
    let dbp_k = CONTINUOUS.iter().position(|c| *c == "dbp").expect("listed");
    let draw_uniforms = |rng: &mut dyn RngCore| -> Vec<f64> {
        match &chol {
            None => (0..CONTINUOUS.len()).map(|_| uniform_open(rng)).collect(),
            Some(l) => {
                let xi = nalgebra::DVector::from_iterator(
                    CONTINUOUS.len(),
                    (0..CONTINUOUS.len()).map(|_| normal_quantile(uniform_open(rng))),
                );
                (l * xi)
                    .iter()
                    .map(|z| 1.0 - upper_tail(*z))
                    .map(|u| u.clamp(1e-16, 1.0 - 1e-16))
                    .collect()
            }
        }
    };

    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let mut values;
        loop {
            let u = draw_uniforms(rng);
            values = laws
                .iter()
                .zip(&u)
                .map(|(law, u)| law.quantile(*u))
                .collect::<Vec<_>>();
            if values[sbp_k] > values[dbp_k] {
                break;
            }
        }
        let female = rng.random::<f64>() < stats.female_rate;
        let r: f64 = rng.random();
        let mut acc = 0.0;
        let mut race = Race::ALL[3];
        for (k, rate) in stats.race_rates.iter().enumerate() {
            acc += rate;
            if r < acc {
                race = Race::ALL[k];
                break;
            }
        }
        let mut p = PatientRecord {
            age: 0.0,
            sex: if female { Sex::Female } else { Sex::Male },
            race_ethnicity: race,
            tobacco_current: rng.random::<f64>() < stats.tobacco_rate,
            cvd_history: rng.random::<f64>() < stats.cvd_rate,
            sbp: 0.0,
            dbp: 0.0,
            bmi: 0.0,
            heart_rate: 0.0,
            hba1c: 0.0,
            total_chol: 0.0,
            hdl: 0.0,
            ldl: 0.0,
            triglycerides: 0.0,
            fasting_glucose: 0.0,
            alt: 0.0,
            potassium: 0.0,
            serum_creatinine: 0.0,
            urine_creatinine: 0.0,
            albumin_creatinine_ratio: 0.0,
            bprx: rng.random::<f64>() < stats.bprx_rate,
            statins: rng.random::<f64>() < stats.statin_rate,
        };
        for (name, v) in CONTINUOUS.iter().zip(values) {
            p.set_numeric(name, v);
        }
        out.push(p);
    }
    Ok(out)
}
