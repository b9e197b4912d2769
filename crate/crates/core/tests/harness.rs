use std::path::Path;

use dwts_core::harness::*;
use dwts_core::policy::{Oracle, Round};
use dwts_core::rng;
use dwts_core::synth::{draw_online_context, mean_reward, ArmParams, OnlineContext, SemConfig};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn small_cfg(policies: Vec<PolicyKind>) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::reference(11);
    cfg.sem = SemConfig {
        p: 8,
        q: 2,
        arms: 2,
        p_eff: 2,
        n_per_arm: 120,
        noise_sd: 1.0,
        psi_scale: 1.0,
        seed: 3,
    };
    cfg.p_grid = vec![];
    cfg.horizon = 60;
    cfg.n_replications = 4;
    cfg.policies = policies;
    cfg
}

fn arm(theta: &[f64], phi: &[f64]) -> ArmParams {
    ArmParams {
        theta_star: DVector::from_row_slice(theta),
        phi_star: DVector::from_row_slice(phi),
        psi_star: DMatrix::zeros(phi.len(), theta.len()),
    }
}

#[test]
fn regret_of_worse_arm_is_the_gap() {
    let params = vec![arm(&[3.0], &[0.0]), arm(&[1.0], &[0.0])];
    let x = OnlineContext::new(DVector::from_vec(vec![1.0, 0.0]), 1);
    assert_eq!(instantaneous_regret(&params, &x, 1).unwrap(), 2.0);
    assert_eq!(instantaneous_regret(&params, &x, 0).unwrap(), 0.0);
}

#[test]
fn regret_matches_brute_force_gap() {
    let mut r = rng::stream(5, &[1]);
    for _ in 0..50 {
        let params = dwts_core::synth::build_true_params(
            &SemConfig {
                arms: 4,
                ..SemConfig::reference(6, 1)
            },
            &mut r,
        )
        .unwrap();
        let x = draw_online_context(6, 3, &mut r);
        let means: Vec<f64> = params.iter().map(|a| mean_reward(a, &x).unwrap()).collect();
        let best = means.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for (a, m) in means.iter().enumerate() {
            let got = instantaneous_regret(&params, &x, a).unwrap();
            assert!((got - (best - m)).abs() < 1e-12);
            assert!(got >= 0.0);
        }
    }
}

#[test]
fn play_with_oracle_has_no_regret() {
    let rounds = vec![
        Round {
            context: DVector::zeros(1),
            means: vec![1.0, 2.0],
        },
        Round {
            context: DVector::zeros(1),
            means: vec![5.0, -2.0],
        },
    ];
    let regret = play(&mut Oracle, &rounds, &[0.3, -0.1]).unwrap();
    assert_eq!(regret, vec![0.0, 0.0]);
}

#[test]
fn trace_cumulative_is_prefix_sum() {
    let tr = RegretTrace::from_instantaneous("X", 0, vec![0.5, 0.0, 1.25, 2.0]);
    assert_eq!(tr.cumulative, vec![0.5, 0.5, 1.75, 3.75]);
    assert_eq!(tr.final_regret(), 3.75);
    assert!((tr.mean_over(2, 4) - 1.625).abs() < 1e-15);
}

fn constant_trace(policy: &str, id: u64, value: f64, t: usize) -> RegretTrace {
    let mut inst = vec![0.0; t];
    inst[0] = value;
    RegretTrace::from_instantaneous(policy, id, inst)
}

#[test]
fn quantiles_of_one_two_three() {
    let traces: Vec<_> = [1.0, 2.0, 3.0]
        .iter()
        .enumerate()
        .map(|(i, v)| constant_trace("P", i as u64, *v, 3))
        .collect();
    let table = aggregate_quantiles(&traces, &[0.1, 0.5, 0.9]).unwrap();
    for row in &table.rows {
        assert!((row[0] - 1.2).abs() < 1e-12);
        assert!((row[1] - 2.0).abs() < 1e-12);
        assert!((row[2] - 2.8).abs() < 1e-12);
    }
}

#[test]
fn single_trace_quantiles_equal_trace() {
    let tr = RegretTrace::from_instantaneous("P", 0, vec![1.0, 2.0, 0.5]);
    let table = aggregate_quantiles(std::slice::from_ref(&tr), &[0.1, 0.5, 0.9]).unwrap();
    for (row, c) in table.rows.iter().zip(&tr.cumulative) {
        assert!(row.iter().all(|v| v == c));
    }
}

#[test]
fn aggregate_rejects_empty_and_mixed_input() {
    assert!(aggregate_quantiles(&[], &[0.5]).is_err());
    let a = constant_trace("A", 0, 1.0, 2);
    let b = constant_trace("B", 1, 1.0, 2);
    assert!(aggregate_quantiles(&[a.clone(), b], &[0.5]).is_err());
    let short = constant_trace("A", 2, 1.0, 1);
    assert!(aggregate_quantiles(&[a, short], &[0.5]).is_err());
}

proptest! {
    #[test]
    fn quantile_bands_are_ordered(values in prop::collection::vec(prop::collection::vec(0.0f64..5.0, 6), 1..12)) {
        let traces: Vec<_> = values
            .into_iter()
            .enumerate()
            .map(|(i, v)| RegretTrace::from_instantaneous("P", i as u64, v))
            .collect();
        let table = aggregate_quantiles(&traces, &[0.1, 0.5, 0.9]).unwrap();
        for row in &table.rows {
            prop_assert!(row[0] <= row[1] && row[1] <= row[2]);
        }
    }
}

#[test]
fn empty_table_list_gives_header_only_csv() {
    let mut buf = Vec::new();
    write_results_csv(&[], &mut buf).unwrap();
    assert_eq!(
        String::from_utf8(buf).unwrap(),
        "policy,round,q10,q50,q90\n"
    );
}

#[test]
fn one_round_table_gives_one_row() {
    let table = QuantileTable {
        policy: "DWTS".into(),
        levels: vec![0.1, 0.5, 0.9],
        rows: vec![vec![0.1, 0.2, 0.3]],
    };
    let mut buf = Vec::new();
    write_results_csv(&[table], &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert_eq!(text.lines().nth(1).unwrap(), "DWTS,1,0.1,0.2,0.3");
}

#[test]
fn csv_round_trip_is_exact() {
    let mut r = rng::stream(9, &[]);
    let tables: Vec<_> = ["A", "B"]
        .iter()
        .map(|p| QuantileTable {
            policy: p.to_string(),
            levels: vec![0.1, 0.5, 0.9],
            rows: (0..25)
                .map(|_| {
                    let mut v: Vec<f64> = (0..3)
                        .map(|_| rand::Rng::random::<f64>(&mut r) * 1e3)
                        .collect();
                    v.sort_by(f64::total_cmp);
                    v
                })
                .collect(),
        })
        .collect();
    let mut buf = Vec::new();
    write_results_csv(&tables, &mut buf).unwrap();
    let back = read_results_csv(buf.as_slice(), Path::new("mem")).unwrap();
    assert_eq!(back.len(), 2);
    for (a, b) in tables.iter().zip(&back) {
        assert_eq!(a.policy, b.policy);
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            for (x, y) in ra.iter().zip(rb) {
                assert!((x - y).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn malformed_csv_is_rejected() {
    let bad = "policy,round,q50\nA,2,1.0\n";
    assert!(read_results_csv(bad.as_bytes(), Path::new("x")).is_err());
    let bad = "who,round,q50\n";
    assert!(read_results_csv(bad.as_bytes(), Path::new("x")).is_err());
}

#[test]
fn svg_is_deterministic_and_has_every_policy() {
    let t1 = QuantileTable {
        policy: "DWTS".into(),
        levels: vec![0.1, 0.5, 0.9],
        rows: (0..50)
            .map(|t| vec![t as f64 * 0.5, t as f64, t as f64 * 1.5])
            .collect(),
    };
    let t2 = QuantileTable {
        policy: "NEW<&>".into(),
        ..t1.clone()
    };
    let style = SvgStyle::default();
    let a = regret_svg(&[t1.clone(), t2.clone()], &style);
    let b = regret_svg(&[t1, t2], &style);
    assert_eq!(a, b);
    assert_eq!(a.matches("<polyline").count(), 2);
    assert_eq!(a.matches("<polygon").count(), 2);
    assert!(a.contains("NEW&lt;&amp;&gt;"));
    assert!(a.contains("#d62728"));
}

#[test]
fn config_json_uses_documented_field_names() {
    let json = r#"{
        "sem": {"p": 20, "q": 3, "K": 2, "p_eff": 5, "n_per_arm": 100, "seed": 1},
        "T": 50, "n_replications": 2, "policies": ["DWTS", "LINTS_FULL", "ORACLE"],
        "alpha": 0.05, "kappa_mode": {"fixed": 0.5}, "base_seed": 4, "output_dir": "out"
    }"#;
    let cfg = ExperimentConfig::from_json_str(json).unwrap();
    assert_eq!(cfg.horizon, 50);
    assert_eq!(cfg.kappa_mode, KappaMode::Fixed(0.5));
    assert!(cfg.redraw_params);
    let theoretical = json.replace(r#"{"fixed": 0.5}"#, r#""theoretical""#);
    assert_eq!(
        ExperimentConfig::from_json_str(&theoretical)
            .unwrap()
            .kappa_mode,
        KappaMode::Theoretical
    );
    assert!(ExperimentConfig::from_json_str(&json.replace(r#""T": 50"#, r#""T": 0"#)).is_err());
    assert!(ExperimentConfig::from_json_str(&json.replace("LINTS_FULL", "LINUCB")).is_err());
}

#[test]
fn oracle_replication_has_zero_regret() {
    let cfg = small_cfg(vec![PolicyKind::Oracle]);
    for id in 0..3 {
        let tr = run_replication(&cfg, PolicyKind::Oracle, id).unwrap();
        assert!(tr.cumulative.iter().all(|v| *v == 0.0));
    }
}

#[test]
fn horizon_one_gives_one_round() {
    let mut cfg = small_cfg(vec![PolicyKind::LinTsFull]);
    cfg.horizon = 1;
    assert_eq!(
        run_replication(&cfg, PolicyKind::LinTsFull, 0)
            .unwrap()
            .horizon(),
        1
    );
}

#[test]
fn replications_are_reproducible_and_valid() {
    let cfg = small_cfg(PolicyKind::ALL.to_vec());
    for kind in PolicyKind::ALL {
        let a = run_replication(&cfg, kind, 2).unwrap();
        let b = run_replication(&cfg, kind, 2).unwrap();
        assert_eq!(a, b, "{kind}");
        assert!(a.instantaneous.iter().all(|r| *r >= 0.0));
        assert!(a.cumulative.windows(2).all(|w| w[1] >= w[0]));
        for (k, c) in a.cumulative.iter().enumerate() {
            let direct: f64 = a.instantaneous[..=k].iter().sum();
            assert!((direct - c).abs() < 1e-9);
        }
    }
}

#[test]
fn policies_share_the_sample_path() {
    let cfg = small_cfg(vec![PolicyKind::Oracle]);
    let a = ReplicationSetup::new(&cfg, 1).unwrap();
    let b = ReplicationSetup::new(&cfg, 1).unwrap();
    assert_eq!(a.noise, b.noise);
    for (ra, rb) in a.rounds.iter().zip(&b.rounds) {
        assert_eq!(ra.context, rb.context);
    }
    let c = ReplicationSetup::new(&cfg, 2).unwrap();
    assert_ne!(a.noise, c.noise);
}

#[test]
fn fixed_params_mode_reuses_the_truth() {
    let mut cfg = small_cfg(vec![PolicyKind::Oracle]);
    cfg.redraw_params = false;
    let a = ReplicationSetup::new(&cfg, 0).unwrap();
    let b = ReplicationSetup::new(&cfg, 1).unwrap();
    assert_eq!(a.params, b.params);
    cfg.redraw_params = true;
    let c = ReplicationSetup::new(&cfg, 0).unwrap();
    let d = ReplicationSetup::new(&cfg, 1).unwrap();
    assert_ne!(c.params[0].phi_star, d.params[0].phi_star);
}

#[test]
fn cell_results_do_not_depend_on_jobs() {
    let cfg = small_cfg(vec![PolicyKind::Dwts, PolicyKind::Oful]);
    let one = run_cell(&cfg, 1);
    let three = run_cell(&cfg, 3);
    for (a, b) in one.traces.iter().zip(&three.traces) {
        for (x, y) in a.iter().zip(b) {
            assert_eq!(x.as_ref().unwrap(), y.as_ref().unwrap());
        }
    }
}

#[test]
fn suite_writes_cells_figures_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_cfg(vec![PolicyKind::LinTsFull]);
    cfg.output_dir = dir.path().to_path_buf();
    let manifest = run_suite(&cfg, 1).unwrap();
    assert_eq!(manifest.cells.len(), 1);
    assert_eq!(manifest.cells[0].seeds.len(), cfg.n_replications);
    assert_eq!(manifest.config_hash.len(), 64);
    let csvs: Vec<_> = std::fs::read_dir(dir.path())
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.path().extension().is_some_and(|x| x == "csv"))
        .collect();
    assert_eq!(csvs.len(), 1);
    assert!(dir.path().join("manifest.json").exists());
    assert!(dir.path().join("regret_p8.svg").exists());
    let tables =
        load_results_csv(&dir.path().join(cell_csv_name(8, PolicyKind::LinTsFull))).unwrap();
    assert_eq!(tables[0].horizon(), cfg.horizon);
}

#[test]
fn failing_cell_is_recorded_and_others_continue() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_cfg(vec![PolicyKind::Dwts, PolicyKind::Oracle]);
    cfg.output_dir = dir.path().to_path_buf();
    // Three rows for eight columns leaves coordinates without a finite
    // standard error, and a zero threshold keeps them in the mask.
    cfg.kappa_mode = KappaMode::Fixed(0.0);
    cfg.sem.n_per_arm = 3;
    let manifest = run_suite(&cfg, 1).unwrap();
    let oracle = manifest
        .cells
        .iter()
        .find(|c| c.policy == "ORACLE")
        .unwrap();
    assert!(oracle.error.is_none());
    assert!(oracle.csv.is_some());
    let dwts = manifest.cells.iter().find(|c| c.policy == "DWTS").unwrap();
    assert!(dwts.error.is_some(), "{dwts:?}");
    assert_eq!(manifest.failed_cells().count(), 1);
}
