use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{ExperimentConfig, PolicyKind};
use super::output::{
    aggregate_quantiles, render_regret_svg, save_results_csv, QuantileTable, SvgStyle,
};
use super::replication::{replication_seed, RegretTrace, ReplicationSetup};
use crate::error::{Error, Result};

/// Outcome of one (p, policy) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub p: usize,
    pub policy: String,
    pub csv: Option<PathBuf>,
    /// Root seed of each replication, in replication order.
    pub seeds: Vec<u64>,
    pub wall_clock_s: f64,
    pub final_median: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    /// SHA-256 of the config's JSON serialization.
    pub config_hash: String,
    pub base_seed: u64,
    pub cells: Vec<CellRecord>,
    pub figures: Vec<PathBuf>,
}

impl Manifest {
    pub fn failed_cells(&self) -> impl Iterator<Item = &CellRecord> {
        self.cells.iter().filter(|c| c.error.is_some())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

pub fn config_hash(cfg: &ExperimentConfig) -> Result<String> {
    let bytes = serde_json::to_vec(cfg)?;
    Ok(Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

/// Traces and timings of every policy at one measured dimension.
pub struct CellResults {
    pub p: usize,
    /// Indexed like `cfg.policies`, each in replication order.
    pub traces: Vec<Vec<Result<RegretTrace>>>,
    pub seconds: Vec<f64>,
}

fn one_replication(cfg: &ExperimentConfig, id: u64) -> Vec<(Result<RegretTrace>, f64)> {
    let started = Instant::now();
    let mut setup = match ReplicationSetup::new(cfg, id) {
        Ok(s) => s,
        Err(e) => {
            let msg = e.to_string();
            return cfg
                .policies
                .iter()
                .map(|k| {
                    let err = Error::Replication {
                        policy: k.label().into(),
                        replication: id,
                        source: Box::new(Error::Config(msg.clone())),
                    };
                    (Err(err), 0.0)
                })
                .collect();
        }
    };
    let shared = started.elapsed().as_secs_f64() / cfg.policies.len() as f64;
    cfg.policies
        .iter()
        .map(|&k| {
            let t0 = Instant::now();
            let out = setup.run(cfg, k);
            (out, shared + t0.elapsed().as_secs_f64())
        })
        .collect()
}

/// Runs every replication of `cfg` at `cfg.sem.p`, spread over `jobs`
/// worker threads. Results do not depend on `jobs`.
pub fn run_cell(cfg: &ExperimentConfig, jobs: usize) -> CellResults {
    let ids: Vec<u64> = (0..cfg.n_replications as u64).collect();
    let per_rep = map_in_order(&ids, jobs, |&id| one_replication(cfg, id));
    let mut traces: Vec<Vec<Result<RegretTrace>>> =
        cfg.policies.iter().map(|_| Vec::new()).collect();
    let mut seconds = vec![0.0; cfg.policies.len()];
    for rep in per_rep {
        for (k, (tr, secs)) in rep.into_iter().enumerate() {
            traces[k].push(tr);
            seconds[k] += secs;
        }
    }
    CellResults {
        p: cfg.sem.p,
        traces,
        seconds,
    }
}

#[cfg(feature = "parallel")]
pub(crate) fn map_in_order<T: Sync, U: Send>(
    items: &[T],
    jobs: usize,
    f: impl Fn(&T) -> U + Sync + Send,
) -> Vec<U> {
    use rayon::prelude::*;
    if jobs <= 1 {
        return items.iter().map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
        Err(_) => items.iter().map(f).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_in_order<T: Sync, U: Send>(
    items: &[T],
    _jobs: usize,
    f: impl Fn(&T) -> U + Sync + Send,
) -> Vec<U> {
    items.iter().map(f).collect()
}

/// File name of the quantile CSV of one cell.
pub fn cell_csv_name(p: usize, policy: PolicyKind) -> String {
    format!("regret_p{p}_{}.csv", policy.label().to_lowercase())
}

/// Runs the whole (p, policy) grid, writing one CSV per cell, one SVG per p
/// and `manifest.json` into `cfg.output_dir`. A failing cell is recorded in
/// the manifest and the other cells still run.
pub fn run_suite(cfg: &ExperimentConfig, jobs: usize) -> Result<Manifest> {
    cfg.validate()?;
    let out = &cfg.output_dir;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut manifest = Manifest {
        config_hash: config_hash(cfg)?,
        base_seed: cfg.base_seed,
        cells: Vec::new(),
        figures: Vec::new(),
    };
    for p in cfg.grid() {
        let cell_cfg = cfg.at_p(p);
        let results = run_cell(&cell_cfg, jobs);
        let seeds: Vec<u64> = (0..cfg.n_replications as u64)
            .map(|id| replication_seed(cfg.base_seed, p, id))
            .collect();
        let mut tables: Vec<QuantileTable> = Vec::new();
        for ((kind, traces), secs) in cfg.policies.iter().zip(results.traces).zip(results.seconds) {
            let mut record = CellRecord {
                p,
                policy: kind.label().into(),
                csv: None,
                seeds: seeds.clone(),
                wall_clock_s: secs,
                final_median: None,
                error: None,
            };
            match traces.into_iter().collect::<Result<Vec<_>>>() {
                Ok(traces) => {
                    let table = aggregate_quantiles(&traces, &cfg.quantiles)?;
                    let path = out.join(cell_csv_name(p, *kind));
                    save_results_csv(std::slice::from_ref(&table), &path)?;
                    record.final_median = table.final_median();
                    record.csv = Some(path);
                    tables.push(table);
                }
                Err(e) => {
                    eprintln!("cell p={p} {kind} failed: {e}");
                    record.error = Some(e.to_string());
                }
            }
            manifest.cells.push(record);
        }
        if !tables.is_empty() {
            let style = SvgStyle {
                title: format!("Cumulative regret, p = {p}"),
                ..SvgStyle::default()
            };
            let path = out.join(format!("regret_p{p}.svg"));
            render_regret_svg(&tables, &path, &style)?;
            manifest.figures.push(path);
        }
    }
    manifest.save(&out.join("manifest.json"))?;
    Ok(manifest)
}
