//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Each exported function takes plain numbers and returns a JSON string, so
//! the page needs no generated TypeScript types. The same functions are
//! callable natively, which is how they are tested.

use dwts_core::deconfound::{ddl_fit, DdlOptions, LambdaRule, TrimTransform};
use dwts_core::harness::{aggregate_quantiles, ExperimentConfig, PolicyKind, ReplicationSetup};
use dwts_core::rng;
use dwts_core::synth::{params_for, OfflineDataset, SemConfig};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Largest measured dimension the page accepts; keeps a browser tab responsive.
pub const MAX_P: usize = 60;

#[derive(Debug, Serialize)]
pub struct Band {
    pub policy: String,
    pub q10: Vec<f64>,
    pub q50: Vec<f64>,
    pub q90: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct RegretDemo {
    pub p: usize,
    pub horizon: usize,
    pub replications: usize,
    pub bands: Vec<Band>,
}

fn check_p(p: usize) -> Result<(), String> {
    if (6..=MAX_P).contains(&p) {
        Ok(())
    } else {
        Err(format!("p must lie between 6 and {MAX_P}"))
    }
}

/// Cumulative-regret quantile bands of DWTS, cold LinTS and the oracle on a
/// small synthetic problem. Cross-validation is replaced by the fixed
/// penalty rule to keep the fit fast in the browser.
pub fn regret_bands(
    p: usize,
    horizon: usize,
    replications: usize,
    seed: u64,
) -> Result<RegretDemo, String> {
    check_p(p)?;
    if !(1..=2000).contains(&horizon) || !(1..=20).contains(&replications) {
        return Err("horizon must lie in 1..=2000 and replications in 1..=20".into());
    }
    let mut cfg = ExperimentConfig::reference(seed).at_p(p);
    cfg.sem.n_per_arm = 500;
    cfg.horizon = horizon;
    cfg.n_replications = replications;
    cfg.policies = vec![PolicyKind::Dwts, PolicyKind::LinTsFull, PolicyKind::Oracle];
    cfg.ddl.lambda_rule = LambdaRule::Fixed { a: 1.0 };
    let mut traces = vec![Vec::new(); cfg.policies.len()];
    for id in 0..replications as u64 {
        let mut setup = ReplicationSetup::new(&cfg, id).map_err(|e| e.to_string())?;
        for (k, kind) in cfg.policies.iter().enumerate() {
            traces[k].push(setup.run(&cfg, *kind).map_err(|e| e.to_string())?);
        }
    }
    let mut bands = Vec::new();
    for (kind, tr) in cfg.policies.iter().zip(&traces) {
        let table = aggregate_quantiles(tr, &[0.1, 0.5, 0.9]).map_err(|e| e.to_string())?;
        let column = |i: usize| table.rows.iter().map(|r| r[i]).collect::<Vec<f64>>();
        bands.push(Band {
            policy: kind.label().to_string(),
            q10: column(0),
            q50: column(1),
            q90: column(2),
        });
    }
    Ok(RegretDemo {
        p,
        horizon,
        replications,
        bands,
    })
}

#[derive(Debug, Serialize)]
pub struct DdlDemo {
    pub truth: Vec<f64>,
    pub theta_hat: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Plain least squares on the same block, to show the confounding bias.
    pub naive: Vec<f64>,
}

/// Debiased estimates with 95% intervals for arm 0 of one synthetic draw.
/// `psi_scale` sets how strongly the hidden confounders load on the
/// measured covariates.
pub fn ddl_estimates(p: usize, n: usize, psi_scale: f64, seed: u64) -> Result<DdlDemo, String> {
    check_p(p)?;
    if n < 2 * p || n > 3000 {
        return Err("n must lie between 2p and 3000".into());
    }
    let cfg = SemConfig {
        n_per_arm: n,
        psi_scale,
        ..SemConfig::reference(p, seed)
    };
    cfg.validate().map_err(|e| e.to_string())?;
    let params = params_for(&cfg, &[]).map_err(|e| e.to_string())?;
    let data = OfflineDataset::generate(&cfg, &params, seed, &[]).map_err(|e| e.to_string())?;
    let block = &data.blocks[0];
    let opts = DdlOptions {
        lambda_rule: LambdaRule::Fixed { a: 1.0 },
        ..DdlOptions::default()
    };
    let est = ddl_fit(&block.z, &block.y, &opts, &mut rng::stream(seed, &[0]))
        .map_err(|e| e.to_string())?;
    let (lower, upper) = (0..p).map(|j| est.interval(j, 1.959963984540054)).unzip();
    let naive = block
        .z
        .clone()
        .svd(true, true)
        .solve(&block.y, 1e-12)
        .map_err(|e| e.to_string())?
        .iter()
        .copied()
        .collect();
    Ok(DdlDemo {
        truth: params[0].theta_star.iter().copied().collect(),
        theta_hat: est.theta_hat,
        lower,
        upper,
        naive,
    })
}

#[derive(Debug, Serialize)]
pub struct Spectrum {
    pub tau: f64,
    pub before: Vec<f64>,
    pub after: Vec<f64>,
}

/// Singular values of an offline design before and after trimming at the
/// given quantile, largest first.
pub fn spectrum(p: usize, n: usize, quantile: f64, seed: u64) -> Result<Spectrum, String> {
    check_p(p)?;
    if !(2..=3000).contains(&n) {
        return Err("n must lie between 2 and 3000".into());
    }
    let cfg = SemConfig {
        n_per_arm: n,
        ..SemConfig::reference(p, seed)
    };
    let params = params_for(&cfg, &[]).map_err(|e| e.to_string())?;
    let data = OfflineDataset::generate(&cfg, &params, seed, &[]).map_err(|e| e.to_string())?;
    let trim = TrimTransform::fit(&data.blocks[0].z, quantile).map_err(|e| e.to_string())?;
    let mut before = trim.singular_values().to_vec();
    before.sort_by(|a, b| b.total_cmp(a));
    let after = before.iter().map(|d| d.min(trim.tau())).collect();
    Ok(Spectrum {
        tau: trim.tau(),
        before,
        after,
    })
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn regret_demo(
    p: usize,
    horizon: usize,
    replications: usize,
    seed: u32,
) -> Result<String, JsError> {
    to_js(regret_bands(p, horizon, replications, seed.into()))
}

#[wasm_bindgen]
pub fn ddl_demo(p: usize, n: usize, psi_scale: f64, seed: u32) -> Result<String, JsError> {
    to_js(ddl_estimates(p, n, psi_scale, seed.into()))
}

#[wasm_bindgen]
pub fn trim_spectrum(p: usize, n: usize, quantile: f64, seed: u32) -> Result<String, JsError> {
    to_js(spectrum(p, n, quantile, seed.into()))
}
