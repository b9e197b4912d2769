//! `dwts`: generate confounded offline data, fit debiased estimates, run
//! regret experiments and render their figures.
//!
//! Every subcommand prints a one-line JSON summary on stdout when it
//! succeeds. Progress and errors go to stderr. Exit codes: 0 success, 2 bad
//! flags or configuration, 3 failure while running.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dwts_core::clinical::{self, ClinicalConfig};
use dwts_core::deconfound::{ddl_fit, DdlOptions};
use dwts_core::harness::{self, ExperimentConfig, SvgStyle};
use dwts_core::rng;
use dwts_core::stats::normal_quantile;
use dwts_core::synth::{params_for, OfflineDataset, SemConfig};
use dwts_core::Error;
use serde_json::{json, Value};

#[derive(Parser)]
#[command(
    name = "dwts",
    version,
    about = "Deconfounded warm-start Thompson sampling simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags every subcommand accepts.
#[derive(Args, Clone, Default)]
struct Common {
    /// Root seed; overrides the seed in the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file or directory (see each subcommand).
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a confounded offline dataset as CSV. `--config` takes a
    /// structural-equation config; `--out` is the CSV path.
    Synth {
        #[command(flatten)]
        common: Common,
        /// Measured dimension when no config is given.
        #[arg(long, default_value_t = 20)]
        p: usize,
    },
    /// Fit the doubly debiased lasso on one arm of an offline CSV.
    /// `--config` takes fit options; `--out` receives the estimate as JSON.
    Ddl {
        #[command(flatten)]
        common: Common,
        /// Offline CSV written by `dwts synth`.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 0)]
        arm: usize,
        /// Level of the reported confidence intervals.
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
    /// Run a synthetic regret suite. `--config` takes an experiment config
    /// (the reference protocol when omitted); `--out` is the results
    /// directory.
    Run {
        #[command(flatten)]
        common: Common,
        /// Worker threads; results do not depend on it.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Run the virtual clinical trial. `--config` takes a clinical config;
    /// `--out` is the results directory.
    Clinical {
        #[command(flatten)]
        common: Common,
        /// Patient CSV in the documented schema.
        #[arg(long, conflicts_with = "synthetic")]
        patients: Option<PathBuf>,
        /// Generate this many synthetic patients instead.
        #[arg(long)]
        synthetic: Option<usize>,
        /// Largest tolerated fraction of rejected patient rows.
        #[arg(long, default_value_t = 0.01)]
        max_reject: f64,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Render quantile CSVs as an SVG figure. `--config` takes a style
    /// file; `--out` is the SVG path. `--seed` is accepted and ignored.
    Plot {
        #[command(flatten)]
        common: Common,
        /// Results CSV; repeat to overlay several.
        #[arg(long = "in", required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        title: Option<String>,
    },
}

/// A failure together with its exit code.
struct Failure {
    code: u8,
    error: Error,
}

impl From<Error> for Failure {
    fn from(error: Error) -> Self {
        let code = if error.is_config() { 2 } else { 3 };
        Failure { code, error }
    }
}

fn config_failure(error: Error) -> Failure {
    Failure { code: 2, error }
}

fn read_config<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| config_failure(Error::io(path, e)))?;
    serde_json::from_str(&text).map_err(|e| {
        config_failure(Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    })
}

fn jobs_or_default(jobs: Option<usize>) -> usize {
    jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .max(1)
}

fn synth(common: Common, p: usize) -> Result<Value, Failure> {
    let mut cfg = match &common.config {
        Some(path) => read_config::<SemConfig>(path)?,
        None => SemConfig::reference(p, 0),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    cfg.validate().map_err(config_failure)?;
    let out = common.out.unwrap_or_else(|| PathBuf::from("offline.csv"));
    let params = params_for(&cfg, &[])?;
    let data = OfflineDataset::generate(&cfg, &params, cfg.seed, &[])?;
    data.save_csv(&out)?;
    Ok(json!({
        "command": "synth",
        "out": out,
        "p": cfg.p,
        "arms": cfg.arms,
        "rows": data.blocks.iter().map(|b| b.z.nrows()).sum::<usize>(),
        "seed": cfg.seed,
    }))
}

fn ddl(common: Common, input: &Path, arm: usize, alpha: f64) -> Result<Value, Failure> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(config_failure(Error::Config(
            "--alpha must lie in (0, 1)".into(),
        )));
    }
    let opts = match &common.config {
        Some(path) => read_config::<DdlOptions>(path)?,
        None => DdlOptions::default(),
    };
    opts.validate().map_err(config_failure)?;
    let data = OfflineDataset::load_csv(input)?;
    let block = data
        .block(arm)
        .ok_or_else(|| config_failure(Error::UnknownArm(arm.to_string())))?;
    let seed = common.seed.unwrap_or(0);
    let est = ddl_fit(
        &block.z,
        &block.y,
        &opts,
        &mut rng::stream(seed, &[arm as u64]),
    )?;
    if let Some(out) = &common.out {
        let text = serde_json::to_string_pretty(&est).map_err(Error::from)?;
        std::fs::write(out, text + "\n").map_err(|e| Error::io(out, e))?;
    }
    let z = normal_quantile(1.0 - alpha / 2.0);
    let (lower, upper): (Vec<f64>, Vec<f64>) = (0..est.p()).map(|j| est.interval(j, z)).unzip();
    let finite = |v: &[f64]| -> Vec<Value> {
        v.iter()
            .map(|x| if x.is_finite() { json!(x) } else { Value::Null })
            .collect()
    };
    Ok(json!({
        "command": "ddl",
        "arm": arm,
        "p": est.p(),
        "lambda": est.lambda,
        "support_size": est.support_size,
        "noise_sd_hat": est.noise_sd_hat,
        "theta_hat": est.theta_hat,
        "sigma_hat": finite(&est.sigma_hat),
        "ci_lower": finite(&lower),
        "ci_upper": finite(&upper),
        "out": common.out,
    }))
}

fn run(common: Common, jobs: Option<usize>) -> Result<Value, Failure> {
    let mut cfg = match &common.config {
        Some(path) => read_config::<ExperimentConfig>(path)?,
        None => ExperimentConfig::reference(0),
    };
    if let Some(seed) = common.seed {
        cfg.base_seed = seed;
        cfg.sem.seed = seed;
    }
    if let Some(out) = common.out {
        cfg.output_dir = out;
    }
    cfg.validate().map_err(config_failure)?;
    let manifest = harness::run_suite(&cfg, jobs_or_default(jobs))?;
    let failed: Vec<Value> = manifest
        .failed_cells()
        .map(|c| json!({"p": c.p, "policy": c.policy, "error": c.error}))
        .collect();
    let summary = json!({
        "command": "run",
        "out": cfg.output_dir,
        "config_hash": manifest.config_hash,
        "cells": manifest.cells.len(),
        "failed": failed,
        "final_median": manifest
            .cells
            .iter()
            .map(|c| (format!("p{}_{}", c.p, c.policy), json!(c.final_median)))
            .collect::<serde_json::Map<_, _>>(),
    });
    if failed.is_empty() {
        Ok(summary)
    } else {
        eprintln!("{summary}");
        Err(Failure {
            code: 3,
            error: Error::Config(format!(
                "{} of {} cells failed",
                failed.len(),
                manifest.cells.len()
            )),
        })
    }
}

fn clinical_cmd(
    common: Common,
    patients: Option<PathBuf>,
    synthetic: Option<usize>,
    max_reject: f64,
    jobs: Option<usize>,
) -> Result<Value, Failure> {
    let mut cfg = match &common.config {
        Some(path) => read_config::<ClinicalConfig>(path)?,
        None => ClinicalConfig::desk_scale(0),
    };
    if let Some(seed) = common.seed {
        cfg.base_seed = seed;
        cfg.trial.seed = seed;
    }
    if let Some(out) = common.out {
        cfg.output_dir = out;
    }
    cfg.validate().map_err(config_failure)?;
    let (pool, rejected) = match patients {
        Some(path) => {
            let report = clinical::ingest_csv(&path, max_reject)?;
            for (line, reason) in &report.rejected {
                eprintln!("{}:{line}: rejected: {reason}", path.display());
            }
            (report.records, report.rejected.len())
        }
        None => (
            clinical::synthetic_pool(synthetic.unwrap_or(10_000), cfg.base_seed)?,
            0,
        ),
    };
    let outcome = clinical::run_clinical_experiment(&cfg, &pool, jobs_or_default(jobs))?;
    let files = outcome.save(&cfg.output_dir)?;
    let summary = serde_json::to_value(outcome.summary()).map_err(Error::from)?;
    Ok(json!({
        "command": "clinical",
        "out": cfg.output_dir,
        "patients": pool.len(),
        "rejected": rejected,
        "files": files,
        "summary": summary,
    }))
}

fn plot(common: Common, inputs: &[PathBuf], title: Option<String>) -> Result<Value, Failure> {
    let mut style = match &common.config {
        Some(path) => read_config::<SvgStyle>(path)?,
        None => SvgStyle::default(),
    };
    if let Some(t) = title {
        style.title = t;
    }
    let mut tables = Vec::new();
    for path in inputs {
        tables.extend(harness::load_results_csv(path)?);
    }
    let out = common.out.unwrap_or_else(|| PathBuf::from("regret.svg"));
    harness::render_regret_svg(&tables, &out, &style)?;
    Ok(json!({
        "command": "plot",
        "out": out,
        "series": tables.iter().map(|t| t.policy.clone()).collect::<Vec<_>>(),
    }))
}

fn dispatch(cli: Cli) -> Result<Value, Failure> {
    match cli.command {
        Command::Synth { common, p } => synth(common, p),
        Command::Ddl {
            common,
            input,
            arm,
            alpha,
        } => ddl(common, &input, arm, alpha),
        Command::Run { common, jobs } => run(common, jobs),
        Command::Clinical {
            common,
            patients,
            synthetic,
            max_reject,
            jobs,
        } => clinical_cmd(common, patients, synthetic, max_reject, jobs),
        Command::Plot {
            common,
            inputs,
            title,
        } => plot(common, &inputs, title),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(Failure { code, error }) => {
            let kind = if code == 2 { "config" } else { "runtime" };
            eprintln!("{}", json!({"error": kind, "message": error.to_string()}));
            ExitCode::from(code)
        }
    }
}
