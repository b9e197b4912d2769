//! Ground-truth parameters, confounded offline data and the online linear
//! reward environment.
//!
//! Offline samples for arm `a` follow the structural model
//!
//! ```text
//! Z = Ψᵀ H + E,     y = θᵀ Z + φᵀ H + ε
//! ```
//!
//! with `H ~ N(0, I_q)`, `E ~ N(0, I_p)` and `ε ~ N(0, σ²)`. The confounders `H`
//! are discarded after generation. Online, `H` becomes the last `q` entries of
//! the context and the mean reward of arm `a` is `[θ_a; φ_a]ᵀ x`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::rng::{self, label, StreamRng};

fn std_normal(rng: &mut (impl RngCore + ?Sized)) -> f64 {
    StandardNormal.sample(rng)
}

/// Sizes and seed of a synthetic structural-equation instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SemConfig {
    /// Measured covariate dimension.
    pub p: usize,
    /// Hidden confounder dimension.
    pub q: usize,
    #[serde(rename = "K")]
    pub arms: usize,
    /// Number of nonzero leading entries of every θ*.
    pub p_eff: usize,
    pub n_per_arm: usize,
    #[serde(default = "default_one")]
    pub noise_sd: f64,
    #[serde(default = "default_one")]
    pub psi_scale: f64,
    pub seed: u64,
}

fn default_one() -> f64 {
    1.0
}

impl SemConfig {
    /// The reference synthetic setting at a given `p`.
    pub fn reference(p: usize, seed: u64) -> Self {
        SemConfig {
            p,
            q: 3,
            arms: 2,
            p_eff: 5,
            n_per_arm: 1000,
            noise_sd: 1.0,
            psi_scale: 1.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 || self.q == 0 || self.arms == 0 || self.n_per_arm == 0 {
            return Err(Error::config(
                "p, q, K and n_per_arm must all be at least 1",
            ));
        }
        if self.p_eff == 0 || self.p_eff > self.p {
            return Err(Error::config(format!(
                "p_eff must lie in 1..=p (p_eff = {}, p = {})",
                self.p_eff, self.p
            )));
        }
        if !(self.noise_sd > 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::config("noise_sd must be positive and finite"));
        }
        if !(self.psi_scale > 0.0 && self.psi_scale.is_finite()) {
            return Err(Error::config("psi_scale must be positive and finite"));
        }
        Ok(())
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: SemConfig = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// True parameters of one arm.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmParams {
    pub theta_star: DVector<f64>,
    pub phi_star: DVector<f64>,
    /// `q × p` loading of confounders onto measured covariates.
    pub psi_star: DMatrix<f64>,
}

impl ArmParams {
    pub fn p(&self) -> usize {
        self.theta_star.len()
    }

    pub fn q(&self) -> usize {
        self.phi_star.len()
    }

    fn check_consistent(&self) -> Result<()> {
        check_dim("psi_star rows (q)", self.q(), self.psi_star.nrows())?;
        check_dim("psi_star columns (p)", self.p(), self.psi_star.ncols())
    }

    /// Indices of the nonzero entries of θ*.
    pub fn support(&self) -> Vec<usize> {
        self.theta_star
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Draws θ*, φ*, Ψ* for every arm.
///
/// Arm with zero-based index `i` gets θ* equal to `i + 2` on its first `p_eff`
/// coordinates and zero elsewhere.
pub fn build_true_params(cfg: &SemConfig, rng: &mut impl RngCore) -> Result<Vec<ArmParams>> {
    cfg.validate()?;
    let params = (0..cfg.arms)
        .map(|arm| {
            let level = (arm + 2) as f64;
            let theta_star =
                DVector::from_fn(cfg.p, |i, _| if i < cfg.p_eff { level } else { 0.0 });
            let phi_star = DVector::from_fn(cfg.q, |_, _| std_normal(rng));
            let psi_star = DMatrix::from_fn(cfg.q, cfg.p, |_, _| cfg.psi_scale * std_normal(rng));
            ArmParams {
                theta_star,
                phi_star,
                psi_star,
            }
        })
        .collect();
    Ok(params)
}

/// Draws `n_a` confounded samples `(Z, y)` for one arm.
pub fn generate_offline(
    params: &ArmParams,
    n_a: usize,
    noise_sd: f64,
    rng: &mut impl RngCore,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    params.check_consistent()?;
    if n_a == 0 {
        return Err(Error::config("n_a must be at least 1"));
    }
    let (p, q) = (params.p(), params.q());
    let mut z = DMatrix::zeros(n_a, p);
    let mut y = DVector::zeros(n_a);
    let mut h = DVector::zeros(q);
    for j in 0..n_a {
        h.iter_mut().for_each(|v| *v = std_normal(rng));
        let mut yj = params.phi_star.dot(&h);
        for c in 0..p {
            let zc = params.psi_star.column(c).dot(&h) + std_normal(rng);
            z[(j, c)] = zc;
            yj += params.theta_star[c] * zc;
        }
        y[j] = yj + noise_sd * std_normal(rng);
    }
    Ok((z, y))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OfflineBlock {
    /// Zero-based arm index.
    pub arm: usize,
    pub z: DMatrix<f64>,
    pub y: DVector<f64>,
}

/// Per-arm offline samples.
#[derive(Debug, Clone, PartialEq)]
pub struct OfflineDataset {
    pub blocks: Vec<OfflineBlock>,
}

impl OfflineDataset {
    /// Generates one block per arm, each from its own stream under `seed`.
    pub fn generate(
        cfg: &SemConfig,
        params: &[ArmParams],
        seed: u64,
        path: &[u64],
    ) -> Result<Self> {
        check_dim("arm parameter count", cfg.arms, params.len())?;
        let blocks = params
            .iter()
            .enumerate()
            .map(|(arm, ap)| {
                let mut full = path.to_vec();
                full.extend([label::OFFLINE, arm as u64]);
                let mut rng = rng::stream(seed, &full);
                let (z, y) = generate_offline(ap, cfg.n_per_arm, cfg.noise_sd, &mut rng)?;
                Ok(OfflineBlock { arm, z, y })
            })
            .collect::<Result<_>>()?;
        Ok(OfflineDataset { blocks })
    }

    pub fn p(&self) -> usize {
        self.blocks.first().map_or(0, |b| b.z.ncols())
    }

    pub fn block(&self, arm: usize) -> Option<&OfflineBlock> {
        self.blocks.iter().find(|b| b.arm == arm)
    }

    /// Writes `arm, z_1..z_p, y` with one-based arm labels.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let p = self.p();
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["arm".to_string()];
        header.extend((1..=p).map(|i| format!("z_{i}")));
        header.push("y".into());
        w.write_record(&header)?;
        for block in &self.blocks {
            for r in 0..block.z.nrows() {
                let mut rec = Vec::with_capacity(p + 2);
                rec.push((block.arm + 1).to_string());
                rec.extend(block.z.row(r).iter().map(|v| v.to_string()));
                rec.push(block.y[r].to_string());
                w.write_record(&rec)?;
            }
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(BufWriter::new(f))
    }

    /// Reads the CSV layout produced by [`OfflineDataset::write_csv`]. Rows
    /// may appear in any arm order; blocks are returned sorted by arm.
    pub fn read_csv<R: Read>(input: R, source: &Path) -> Result<Self> {
        let parse_err = |message: String| Error::Parse {
            path: source.to_path_buf(),
            message,
        };
        let mut rdr = csv::Reader::from_reader(input);
        let header = rdr.headers()?.clone();
        let cols: Vec<&str> = header.iter().map(str::trim).collect();
        if cols.len() < 3 || cols[0] != "arm" || cols[cols.len() - 1] != "y" {
            return Err(parse_err("header must be `arm, z_1..z_p, y`".into()));
        }
        let p = cols.len() - 2;
        for (i, c) in cols[1..=p].iter().enumerate() {
            if *c != format!("z_{}", i + 1) {
                return Err(parse_err(format!(
                    "column {} must be named z_{}",
                    i + 2,
                    i + 1
                )));
            }
        }
        let mut rows: Vec<(usize, Vec<f64>, f64)> = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row_no = line + 2;
            let arm: usize = rec[0]
                .trim()
                .parse()
                .map_err(|_| parse_err(format!("row {row_no}: bad arm label `{}`", &rec[0])))?;
            if arm == 0 {
                return Err(parse_err(format!("row {row_no}: arm labels start at 1")));
            }
            let mut vals = Vec::with_capacity(p + 1);
            for field in rec.iter().skip(1) {
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|_| parse_err(format!("row {row_no}: bad number `{field}`")))?;
                vals.push(v);
            }
            let y = vals.pop().expect("row has at least one value");
            rows.push((arm - 1, vals, y));
        }
        let n_arms = rows.iter().map(|r| r.0 + 1).max().unwrap_or(0);
        let blocks = (0..n_arms)
            .filter_map(|arm| {
                let sel: Vec<&(usize, Vec<f64>, f64)> =
                    rows.iter().filter(|r| r.0 == arm).collect();
                if sel.is_empty() {
                    return None;
                }
                let z = DMatrix::from_fn(sel.len(), p, |i, j| sel[i].1[j]);
                let y = DVector::from_iterator(sel.len(), sel.iter().map(|r| r.2));
                Some(OfflineBlock { arm, z, y })
            })
            .collect();
        Ok(OfflineDataset { blocks })
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(BufReader::new(f), path)
    }
}

/// Online context `[measured covariates; formerly hidden features]`.
#[derive(Debug, Clone, PartialEq)]
pub struct OnlineContext {
    pub x: DVector<f64>,
    /// Number of leading measured entries.
    pub p: usize,
}

impl OnlineContext {
    pub fn new(x: DVector<f64>, p: usize) -> Self {
        OnlineContext { x, p }
    }

    pub fn q(&self) -> usize {
        self.x.len() - self.p
    }

    pub fn measured(&self) -> &[f64] {
        &self.x.as_slice()[..self.p]
    }

    pub fn hidden(&self) -> &[f64] {
        &self.x.as_slice()[self.p..]
    }
}

/// Source of online contexts.
pub trait ContextSampler: Send + Sync {
    fn sample(&self, rng: &mut dyn RngCore) -> OnlineContext;
}

/// i.i.d. standard normal contexts.
#[derive(Debug, Clone, Copy)]
pub struct GaussianContexts {
    pub p: usize,
    pub q: usize,
}

impl ContextSampler for GaussianContexts {
    fn sample(&self, rng: &mut dyn RngCore) -> OnlineContext {
        draw_online_context(self.p, self.q, rng)
    }
}

pub fn draw_online_context(p: usize, q: usize, rng: &mut (impl RngCore + ?Sized)) -> OnlineContext {
    let x = DVector::from_fn(p + q, |_, _| std_normal(rng));
    OnlineContext { x, p }
}

/// Noise-free reward `[θ*; φ*]ᵀ x`.
pub fn mean_reward(params: &ArmParams, x: &OnlineContext) -> Result<f64> {
    mean_reward_slice(params, x.x.as_slice())
}

pub(crate) fn mean_reward_slice(params: &ArmParams, x: &[f64]) -> Result<f64> {
    let p = params.p();
    check_dim("context length (p + q)", p + params.q(), x.len())?;
    let measured: f64 = params
        .theta_star
        .iter()
        .zip(&x[..p])
        .map(|(a, b)| a * b)
        .sum();
    let hidden: f64 = params
        .phi_star
        .iter()
        .zip(&x[p..])
        .map(|(a, b)| a * b)
        .sum();
    Ok(measured + hidden)
}

pub fn online_reward(
    params: &ArmParams,
    x: &OnlineContext,
    noise_sd: f64,
    rng: &mut (impl RngCore + ?Sized),
) -> Result<f64> {
    Ok(mean_reward(params, x)? + noise_sd * std_normal(rng))
}

/// Arm with the largest mean reward; ties go to the lowest index.
pub fn best_arm(all_params: &[ArmParams], x: &OnlineContext) -> Result<(usize, f64)> {
    let means = all_params
        .iter()
        .map(|ap| mean_reward(ap, x))
        .collect::<Result<Vec<_>>>()?;
    argmax(&means).ok_or(Error::Empty("arm parameter list"))
}

/// Index and value of the first maximum.
pub fn argmax(values: &[f64]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            Some((_, b)) if v <= b => {}
            _ => best = Some((i, v)),
        }
    }
    best
}

/// Convenience: parameters drawn from the instance's own params stream.
pub fn params_for(cfg: &SemConfig, path: &[u64]) -> Result<Vec<ArmParams>> {
    let mut full = path.to_vec();
    full.push(label::PARAMS);
    let mut rng: StreamRng = rng::stream(cfg.seed, &full);
    build_true_params(cfg, &mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats;

    fn cfg(p: usize, p_eff: usize) -> SemConfig {
        SemConfig {
            p,
            q: 3,
            arms: 2,
            p_eff,
            n_per_arm: 50,
            noise_sd: 1.0,
            psi_scale: 1.0,
            seed: 11,
        }
    }

    #[test]
    fn theta_star_is_padded_step() {
        let params = params_for(&cfg(20, 5), &[]).unwrap();
        let mut expect = vec![2.0; 5];
        expect.extend(vec![0.0; 15]);
        assert_eq!(params[0].theta_star.as_slice(), expect.as_slice());
        assert!(params[1].theta_star.iter().take(5).all(|&v| v == 3.0));
        assert_eq!(params[1].support(), vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn dense_limit_has_full_support() {
        let params = params_for(&cfg(6, 6), &[]).unwrap();
        assert!(params.iter().all(|ap| ap.support().len() == 6));
    }

    #[test]
    fn rejects_bad_config() {
        assert!(cfg(4, 5).validate().is_err());
        let mut c = cfg(4, 2);
        c.noise_sd = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn json_has_exact_field_names() {
        let c = cfg(20, 5);
        let v: serde_json::Value = serde_json::to_value(&c).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(
            keys,
            [
                "K",
                "n_per_arm",
                "noise_sd",
                "p",
                "p_eff",
                "psi_scale",
                "q",
                "seed"
            ]
        );
        assert_eq!(SemConfig::from_json_str(&v.to_string()).unwrap(), c);
        assert!(SemConfig::from_json_str(
            r#"{"p":2,"q":1,"K":1,"p_eff":1,"n_per_arm":3,"seed":1,"extra":0}"#
        )
        .is_err());
    }

    #[test]
    fn confounding_off_gives_exact_linear_outcome() {
        let params = ArmParams {
            theta_star: DVector::from_vec(vec![1.0, -2.0, 0.5]),
            phi_star: DVector::zeros(2),
            psi_star: DMatrix::zeros(2, 3),
        };
        let mut rng = rng::stream(3, &[]);
        let (z, y) = generate_offline(&params, 40, 1e-300, &mut rng).unwrap();
        let fitted = &z * &params.theta_star;
        assert!((fitted - y).amax() < 1e-12);
    }

    #[test]
    fn pure_noise_outcome_variance() {
        let params = ArmParams {
            theta_star: DVector::zeros(4),
            phi_star: DVector::zeros(2),
            psi_star: DMatrix::from_element(2, 4, 1.0),
        };
        let mut rng = rng::stream(5, &[]);
        let (_, y) = generate_offline(&params, 4000, 2.0, &mut rng).unwrap();
        let v = stats::variance(y.as_slice());
        // sd of the sample variance is about sigma^2 * sqrt(2/n) = 0.09
        assert!((v - 4.0).abs() < 0.3, "variance {v}");
    }

    #[test]
    fn covariance_matches_population() {
        let c = SemConfig {
            n_per_arm: 1000,
            ..SemConfig::reference(20, 9)
        };
        let params = params_for(&c, &[]).unwrap();
        let mut rng = rng::stream(c.seed, &[label::OFFLINE]);
        let (z, _) = generate_offline(&params[0], 1000, 1.0, &mut rng).unwrap();
        let psi = &params[0].psi_star;
        let population = psi.transpose() * psi + DMatrix::identity(20, 20);
        let centered_cov = {
            let means = z.row_mean();
            let mut zc = z.clone();
            for mut row in zc.row_iter_mut() {
                row -= &means;
            }
            zc.transpose() * zc / 999.0
        };
        // Entrywise sd is sqrt((Σ_ii Σ_jj + Σ_ij²)/n); normalise by it.
        let mut worst = 0.0f64;
        for i in 0..20 {
            for j in 0..20 {
                let sd = ((population[(i, i)] * population[(j, j)] + population[(i, j)].powi(2))
                    / 1000.0)
                    .sqrt();
                worst = worst.max((centered_cov[(i, j)] - population[(i, j)]).abs() / sd);
            }
        }
        assert!(worst < 4.5, "worst standardized deviation {worst}");
        // Standardized by the unit diagonal of E the ±0.15 band holds for the
        // correlation matrix.
        let d = population.diagonal().map(f64::sqrt);
        for i in 0..20 {
            for j in 0..20 {
                let emp =
                    centered_cov[(i, j)] / (centered_cov[(i, i)] * centered_cov[(j, j)]).sqrt();
                let pop = population[(i, j)] / (d[i] * d[j]);
                assert!((emp - pop).abs() < 0.15, "({i},{j}) {emp} vs {pop}");
            }
        }
    }

    #[test]
    fn generation_is_reproducible() {
        let c = cfg(8, 3);
        let params = params_for(&c, &[]).unwrap();
        let a = OfflineDataset::generate(&c, &params, c.seed, &[0]).unwrap();
        let b = OfflineDataset::generate(&c, &params, c.seed, &[0]).unwrap();
        assert_eq!(a, b);
        let other = OfflineDataset::generate(&c, &params, c.seed, &[1]).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let params = ArmParams {
            theta_star: DVector::zeros(3),
            phi_star: DVector::zeros(2),
            psi_star: DMatrix::zeros(2, 4),
        };
        let mut rng = rng::stream(1, &[]);
        assert!(matches!(
            generate_offline(&params, 5, 1.0, &mut rng),
            Err(Error::Dimension { .. })
        ));
        let x = OnlineContext::new(DVector::zeros(4), 3);
        assert!(mean_reward(&params, &x).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let c = cfg(4, 2);
        let params = params_for(&c, &[]).unwrap();
        let data = OfflineDataset::generate(&c, &params, 5, &[]).unwrap();
        let mut buf = Vec::new();
        data.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("arm,z_1,z_2,z_3,z_4,y\n"));
        let back = OfflineDataset::read_csv(buf.as_slice(), Path::new("mem")).unwrap();
        assert_eq!(back, data);
    }

    #[test]
    fn context_shape_and_determinism() {
        let a = draw_online_context(20, 3, &mut rng::stream(4, &[]));
        let b = draw_online_context(20, 3, &mut rng::stream(4, &[]));
        assert_eq!(a.x.len(), 23);
        assert_eq!(a, b);
        assert_eq!(a.hidden().len(), 3);
    }

    #[test]
    fn context_coordinates_are_centered() {
        let mut rng = rng::stream(21, &[]);
        let mut sums = [0.0; 5];
        for _ in 0..10_000 {
            let c = draw_online_context(3, 2, &mut rng);
            for (s, v) in sums.iter_mut().zip(c.x.iter()) {
                *s += v;
            }
        }
        assert!(sums.iter().all(|s| (s / 10_000.0).abs() < 0.05));
    }

    #[test]
    fn mean_reward_cases() {
        let mut theta = DVector::zeros(4);
        theta[0] = 1.0;
        let params = ArmParams {
            theta_star: theta,
            phi_star: DVector::zeros(1),
            psi_star: DMatrix::zeros(1, 4),
        };
        let zero = OnlineContext::new(DVector::zeros(5), 4);
        assert_eq!(mean_reward(&params, &zero).unwrap(), 0.0);
        let x = OnlineContext::new(DVector::from_vec(vec![3.0, 0.0, 0.0, 0.0, 0.0]), 4);
        assert_eq!(mean_reward(&params, &x).unwrap(), 3.0);
        assert_eq!(
            online_reward(&params, &x, 0.0, &mut rng::stream(0, &[])).unwrap(),
            3.0
        );
    }

    #[test]
    fn mean_reward_matches_naive_sum() {
        let c = SemConfig::reference(20, 4);
        let params = params_for(&c, &[]).unwrap();
        let mut rng = rng::stream(8, &[]);
        for _ in 0..50 {
            let x = draw_online_context(20, 3, &mut rng);
            for ap in &params {
                let mut naive = 0.0;
                for i in 0..20 {
                    naive += ap.theta_star[i] * x.x[i];
                }
                for k in 0..3 {
                    naive += ap.phi_star[k] * x.x[20 + k];
                }
                assert!((mean_reward(ap, &x).unwrap() - naive).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn online_noise_moments() {
        let c = SemConfig::reference(5, 2);
        let params = params_for(&c, &[]).unwrap();
        let x = draw_online_context(5, 3, &mut rng::stream(1, &[]));
        let m = mean_reward(&params[0], &x).unwrap();
        let mut rng = rng::stream(2, &[]);
        let draws: Vec<f64> = (0..100_000)
            .map(|_| online_reward(&params[0], &x, 1.0, &mut rng).unwrap())
            .collect();
        assert!((stats::mean(&draws) - m).abs() < 0.02);
        assert!((stats::variance(&draws).sqrt() - 1.0).abs() < 0.02);
    }

    #[test]
    fn best_arm_tie_break_and_enumeration() {
        let c = SemConfig {
            arms: 1,
            ..SemConfig::reference(5, 1)
        };
        let one = params_for(&c, &[]).unwrap();
        let x = draw_online_context(5, 3, &mut rng::stream(1, &[]));
        assert_eq!(best_arm(&one, &x).unwrap().0, 0);
        let same = vec![one[0].clone(), one[0].clone(), one[0].clone()];
        assert_eq!(best_arm(&same, &x).unwrap().0, 0);

        let c = SemConfig {
            arms: 5,
            ..SemConfig::reference(6, 3)
        };
        let params = params_for(&c, &[]).unwrap();
        let mut rng = rng::stream(9, &[]);
        for _ in 0..100 {
            let x = draw_online_context(6, 3, &mut rng);
            let means: Vec<f64> = params
                .iter()
                .map(|ap| mean_reward(ap, &x).unwrap())
                .collect();
            let mut brute = 0;
            for a in 1..means.len() {
                if means[a] > means[brute] {
                    brute = a;
                }
            }
            assert_eq!(best_arm(&params, &x).unwrap(), (brute, means[brute]));
        }
    }
}
