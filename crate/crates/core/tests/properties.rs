use mcuq::harness::{generate_random_mrp, ExperimentConfig, ExperimentKind, ModelSource, RandomMrpSpec};
use mcuq::linalg::{op_norm, psd_le, Mat};
use mcuq::markov::{stationary_distribution, ChainModel};
use mcuq::metrics::{fit_rate, halfspace_discrepancy, GaussianSpec};
use mcuq::mrp::{td_run, TdConfig};
use mcuq::rng::{derive_seed, stream_rng};
use mcuq::stats::{wilson_interval, Z95};
use proptest::prelude::*;
use rand::Rng;

fn kernel_strategy() -> impl Strategy<Value = Mat> {
    (2usize..7).prop_flat_map(|n| {
        prop::collection::vec(0.01f64..1.0, n * n).prop_map(move |w| {
            let mut k = Mat::from_row_slice(n, n, &w);
            for mut row in k.row_iter_mut() {
                let s = row.sum();
                row /= s;
            }
            k
        })
    })
}

fn random_spec(seed: u64, n: usize, dim: usize, gamma: f64) -> RandomMrpSpec {
    RandomMrpSpec {
        n_states: n,
        branching: 2.min(n),
        dim: dim.min(n),
        gamma,
        seed,
        min_lambda0: 1e-4,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn stationary_law_is_invariant(k in kernel_strategy()) {
        let mu = stationary_distribution(&k).unwrap();
        prop_assert!((mu.sum() - 1.0).abs() < 1e-12);
        prop_assert!(mu.iter().all(|&p| p > 0.0));
        let moved = k.transpose() * &mu;
        prop_assert!((moved - &mu).amax() < 1e-12);
        let chain = ChainModel::stationary_start(k).unwrap();
        let lam = chain.spectral_expansion();
        prop_assert!((0.0..1.0).contains(&lam));
    }

    #[test]
    fn generated_models_satisfy_population_facts(
        seed in any::<u64>(),
        n in 3usize..12,
        dim in 1usize..4,
        gamma in 0.0f64..0.95,
    ) {
        let mrp = generate_random_mrp(&random_spec(seed, n, dim, gamma)).unwrap();
        let a = mrp.a_mat();
        let sym = a + a.transpose();
        let sigma = mrp.sigma_mat();
        let tol = 1e-10 * op_norm(&sym);
        prop_assert!(psd_le(&(sigma * (2.0 * (1.0 - gamma))), &sym, tol));
        prop_assert!(psd_le(&sym, &(sigma * (2.0 * (1.0 + gamma))), tol));
        prop_assert!(mrp.a_inverse_norm() <= (1.0 + 1e-9) / (mrp.lambda0() * (1.0 - gamma)));
        let resid = a * mrp.theta_star() - mrp.b_vec();
        prop_assert!(resid.amax() < 1e-9 * (1.0 + mrp.theta_star().amax()));
        prop_assert!(mrp.theta_star().norm() <= (1.0 + 1e-9) / (mrp.lambda0() * (1.0 - gamma)));
    }

    #[test]
    fn td_runs_are_bitwise_reproducible(seed in any::<u64>(), stream in 0u64..1000) {
        let mrp = generate_random_mrp(&random_spec(7, 6, 2, 0.6)).unwrap();
        let cfg = TdConfig::default_for(&mrp, 500);
        let a = td_run(&mrp, &cfg, seed, stream).unwrap();
        let b = td_run(&mrp, &cfg, seed, stream).unwrap();
        prop_assert_eq!(a.theta_bar, b.theta_bar);
    }

    #[test]
    fn streams_reproduce(seed in any::<u64>(), stream in any::<u64>()) {
        let x: u64 = stream_rng(seed, stream).random();
        let y: u64 = stream_rng(seed, stream).random();
        prop_assert_eq!(x, y);
        let z: u64 = stream_rng(seed, stream.wrapping_add(1)).random();
        prop_assert_ne!(x, z);
        prop_assert_ne!(derive_seed(seed, "a"), derive_seed(seed, "b"));
    }

    #[test]
    fn wilson_interval_brackets_the_proportion(trials in 1usize..5000, frac in 0.0f64..=1.0) {
        let k = ((trials as f64) * frac).round() as usize;
        let (lo, hi) = wilson_interval(k, trials, Z95);
        let p = k as f64 / trials as f64;
        prop_assert!(0.0 <= lo && lo <= p + 1e-12 && p <= hi + 1e-12 && hi <= 1.0);
    }

    #[test]
    fn power_laws_are_fitted_exactly(slope in -2.0f64..2.0, scale in 0.01f64..100.0) {
        let grid: Vec<(f64, f64)> = [1e2, 1e3, 1e4, 1e5, 1e6].iter().map(|&t| (t, scale * f64::powf(t, slope))).collect();
        let fit = fit_rate(&grid).unwrap();
        prop_assert!((fit.slope - slope).abs() < 1e-9);
        prop_assert!((fit.intercept - scale.ln()).abs() < 1e-7);
    }

    #[test]
    fn halfspace_discrepancy_is_a_probability(seed in any::<u64>(), shift in -3.0f64..3.0) {
        let cov = Mat::identity(2, 2);
        let gauss = GaussianSpec::centered(cov).unwrap();
        let mut rng = stream_rng(seed, 0);
        let samples: Vec<_> = gauss.sample(200, &mut rng).into_iter().map(|x| x.add_scalar(shift)).collect();
        let est = halfspace_discrepancy(&samples, &gauss, 16, seed).unwrap();
        prop_assert!((0.0..=1.0).contains(&est.value));
    }

    #[test]
    fn config_hash_ignores_execution_settings(workers in 1usize..64, seed in any::<u64>()) {
        let mut cfg = ExperimentConfig::new(
            ExperimentKind::TdRate,
            ModelSource::Random(random_spec(1, 5, 2, 0.5)),
            vec![10, 20, 30, 40],
            10,
            seed,
        );
        let base = cfg.hash();
        cfg.workers = Some(workers);
        cfg.out = Some(format!("out-{workers}").into());
        prop_assert_eq!(&base, &cfg.hash());
        let text = serde_json::to_string(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(base, back.hash());
    }
}
