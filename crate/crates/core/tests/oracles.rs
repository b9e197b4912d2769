mod common;

use common::*;
use dwts_core::deconfound::*;
use dwts_core::policy::*;
use dwts_core::rng;
use dwts_core::synth::*;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

#[test]
fn coordinate_descent_matches_proximal_gradient() {
    for seed in 0..25 {
        let inst = lasso_instance(seed);
        let fit = lasso_cd(&inst.x, &inst.y, inst.lambda, 1e-12, 100_000);
        assert!(fit.converged, "seed {seed}");
        let reference = proximal_gradient_lasso(&inst.x, &inst.y, inst.lambda);
        let ours = objective(&inst.x, &inst.y, &fit.beta, inst.lambda);
        let theirs = objective(&inst.x, &inst.y, &reference, inst.lambda);
        assert!(
            (ours - theirs).abs() < 1e-6,
            "seed {seed}: {ours} vs {theirs}"
        );
        assert!(kkt_violation(&inst.x, &inst.y, &fit.beta, inst.lambda) < 1e-5);
    }
}

#[test]
fn penalty_above_lambda_max_gives_zero() {
    let inst = lasso_instance(99);
    let n = inst.x.nrows() as f64;
    let lmax = (inst.x.transpose() * &inst.y).amax() / n;
    let fit = lasso_cd(&inst.x, &inst.y, lmax * 1.0001, 1e-12, 10_000);
    assert_eq!(fit.support_size(), 0);
}

#[test]
fn streaming_posterior_equals_batch_ridge() {
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    for _ in 0..20 {
        let d = rng.random_range(1..=30);
        let t = rng.random_range(1..=200);
        let x = gaussian_matrix(&mut rng, t, d);
        let y = gaussian_matrix(&mut rng, t, 1).column(0).into_owned();
        let mu0 = gaussian_matrix(&mut rng, d, 1).column(0).into_owned();
        let diag = DVector::from_fn(d, |_, _| rng.random_range(0.2..5.0));
        let b0 = DMatrix::from_diagonal(&diag);
        let mut post = GaussianPosterior::new(mu0.clone(), b0.clone()).unwrap();
        for i in 0..t {
            post.update(&x.row(i).transpose(), y[i]).unwrap();
        }
        let batch = batch_ridge_mean(&mu0, &b0, &x, &y);
        assert!((post.mu() - batch).amax() < 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn posterior_precision_grows(d in 1usize..8, seed in 0u64..1000) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut post = init_cold(d).unwrap();
        let x = gaussian_matrix(&mut rng, 1, d).row(0).transpose();
        let before = post.precision().clone();
        post.update(&x, 1.0).unwrap();
        let diff = post.precision() - before;
        // B' - B = x xᵀ is positive semidefinite
        prop_assert!(diff.symmetric_eigenvalues().min() > -1e-10);
    }

    #[test]
    fn kkt_holds_for_random_instances(seed in 1000u64..2000) {
        let inst = lasso_instance(seed);
        let fit = lasso_cd(&inst.x, &inst.y, inst.lambda, 1e-12, 100_000);
        prop_assert!(kkt_violation(&inst.x, &inst.y, &fit.beta, inst.lambda) < 1e-5);
    }

    #[test]
    fn mask_keeps_exactly_large_estimates(theta in prop::collection::vec(-3.0f64..3.0, 1..30), kappa in 0.0f64..2.0) {
        let mask = build_mask(&theta, kappa);
        for (j, t) in theta.iter().enumerate() {
            prop_assert_eq!(mask.selected()[j], t.abs() >= kappa);
        }
        prop_assert_eq!(mask.p_eff(), mask.indices().len());
    }
}

fn fixed_options() -> DdlOptions {
    DdlOptions {
        lambda_rule: LambdaRule::Fixed { a: 1.0 },
        ..DdlOptions::default()
    }
}

#[test]
fn ddl_is_equivariant_to_row_order() {
    let cfg = SemConfig {
        n_per_arm: 300,
        ..SemConfig::reference(15, 4)
    };
    let params = params_for(&cfg, &[]).unwrap();
    let data = OfflineDataset::generate(&cfg, &params, cfg.seed, &[]).unwrap();
    let block = &data.blocks[0];
    let n = block.z.nrows();
    let perm: Vec<usize> = (0..n).map(|i| (i * 7 + 3) % n).collect();
    let z2 = DMatrix::from_fn(n, block.z.ncols(), |i, j| block.z[(perm[i], j)]);
    let y2 = DVector::from_fn(n, |i, _| block.y[perm[i]]);
    let a = ddl_fit(
        &block.z,
        &block.y,
        &fixed_options(),
        &mut rng::stream(1, &[]),
    )
    .unwrap();
    let b = ddl_fit(&z2, &y2, &fixed_options(), &mut rng::stream(1, &[])).unwrap();
    for j in 0..a.p() {
        assert!((a.theta_hat[j] - b.theta_hat[j]).abs() < 1e-6, "theta {j}");
        assert!((a.sigma_hat[j] - b.sigma_hat[j]).abs() < 1e-6, "sigma {j}");
    }
}

#[test]
fn unconfounded_ddl_covers_and_signs() {
    let z975 = 1.959963984540054;
    let (mut covered, mut total) = (0, 0);
    for rep in 0..20 {
        let cfg = SemConfig {
            psi_scale: 1e-3,
            ..SemConfig::reference(20, 300 + rep)
        };
        let params = params_for(&cfg, &[]).unwrap();
        let data = OfflineDataset::generate(&cfg, &params, cfg.seed, &[]).unwrap();
        for (a, block) in data.blocks.iter().enumerate() {
            let est = ddl_fit(
                &block.z,
                &block.y,
                &DdlOptions::default(),
                &mut rng::stream(cfg.seed, &[a as u64]),
            )
            .unwrap();
            for j in 0..cfg.p {
                let truth = params[a].theta_star[j];
                let (lo, hi) = est.interval(j, z975);
                covered += usize::from(lo <= truth && truth <= hi);
                total += 1;
                if truth != 0.0 {
                    assert_eq!(est.theta_hat[j].signum(), truth.signum());
                }
            }
        }
    }
    let rate = covered as f64 / total as f64;
    assert!(rate > 0.9, "coverage {rate}");
}

#[test]
fn warm_start_with_unit_prior_is_cold_lints() {
    let p = 6;
    let q = 2;
    let est = DdlEstimate {
        theta_hat: vec![0.0; p],
        sigma_hat: vec![1.0; p],
        lambda: 0.1,
        support_size: 0,
        noise_sd_hat: 1.0,
        non_identifiable: vec![],
    };
    let mask = Mask::all(p);
    let start = WarmStart::new(&est, &mask, q, VarianceMode::Variance).unwrap();
    let mut warm = LinearThompson::warm("w", &[start.clone(), start], rng::stream(3, &[])).unwrap();
    let mut cold =
        LinearThompson::cold("c", vec![mask.clone(), mask], q, rng::stream(3, &[])).unwrap();
    let mut ctx_rng = rng::stream(4, &[]);
    for t in 0..200 {
        let x = draw_online_context(p, q, &mut ctx_rng).x;
        let round = Round {
            context: x,
            means: vec![0.0, 0.0],
        };
        let a = warm.select(&round).unwrap();
        assert_eq!(a, cold.select(&round).unwrap(), "round {t}");
        let reward = (t % 3) as f64 - 1.0;
        warm.observe(a, &round, reward).unwrap();
        cold.observe(a, &round, reward).unwrap();
    }
    for (w, c) in warm.posteriors().iter().zip(cold.posteriors()) {
        assert!((w.mu() - c.mu()).amax() < 1e-12);
    }
}
