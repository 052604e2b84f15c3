use nalgebra::DMatrix;
use proptest::prelude::*;
use sslci::ace::build_operator_t;
use sslci::ci::{bayes_gap_check, eps_ci_universal};
use sslci::generators::{discrete_joint_random, DiscreteJoint};
use sslci::harness::{parse_kv, ExperimentConfig, ExperimentKind};
use sslci::linalg::{pinv, svd, DEFAULT_RANK_TOL};
use sslci::rng::derive_seed;

fn low_rank(r: usize, c: usize, rank: usize, entries: &[f64]) -> DMatrix<f64> {
    let a = DMatrix::from_fn(r, rank, |i, j| entries[(i * rank + j) % entries.len()]);
    let b = DMatrix::from_fn(rank, c, |i, j| entries[(7 + i * c + j) % entries.len()]);
    a * b
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn svd_reconstructs(r in 1usize..9, c in 1usize..9, rank in 1usize..4, entries in prop::collection::vec(-3.0f64..3.0, 40)) {
        let m = low_rank(r, c, rank, &entries);
        let d = svd(&m);
        let back = &d.u * DMatrix::from_diagonal(&d.singular_values) * d.v.transpose();
        prop_assert!((back - &m).amax() <= 1e-10 * m.amax().max(1.0));
        for w in d.singular_values.as_slice().windows(2) {
            prop_assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn pinv_penrose(r in 1usize..8, c in 1usize..8, rank in 1usize..4, entries in prop::collection::vec(-3.0f64..3.0, 40)) {
        let a = low_rank(r, c, rank, &entries);
        let p = pinv(&a, DEFAULT_RANK_TOL);
        let scale = a.amax().max(1.0);
        prop_assert!((&a * &p * &a - &a).amax() <= 1e-9 * scale);
        prop_assert!((&p * &a * &p - &p).amax() <= 1e-9 * p.amax().max(1.0));
        let ap = &a * &p;
        prop_assert!((&ap - ap.transpose()).amax() <= 1e-9);
    }

    #[test]
    fn joint_operator_has_unit_top_value(n1 in 2usize..9, n2 in 2usize..9, ny in 1usize..4, seed in any::<u64>(), ci in any::<bool>()) {
        let j = discrete_joint_random((n1, n2, ny), seed, ci).unwrap();
        prop_assert!((j.p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let s = build_operator_t(&j).unwrap().singular_values();
        prop_assert!((s[0] - 1.0).abs() < 1e-10);
        prop_assert!(s.iter().all(|&v| v <= 1.0 + 1e-10));
    }

    #[test]
    fn bayes_gap_holds(weights in prop::collection::vec(0.01f64..1.0, 3 * 4 * 3)) {
        let j = DiscreteJoint::from_weights(3, 4, 3, weights).unwrap();
        prop_assert!(bayes_gap_check(&j).holds());
    }

    #[test]
    fn eps_ci_vanishes_only_under_ci(n1 in 2usize..6, n2 in 2usize..6, ny in 1usize..4, seed in any::<u64>()) {
        let ci = discrete_joint_random((n1, n2, ny), seed, true).unwrap();
        prop_assert!(eps_ci_universal(&ci).unwrap() <= 1e-10);
        let other = discrete_joint_random((n1, n2, ny), seed, false).unwrap();
        prop_assert!(eps_ci_universal(&other).unwrap() >= 0.0);
    }

    #[test]
    fn derived_seeds_are_stable_and_distinct(master in any::<u64>(), a in 0u64..1000, b in 0u64..1000) {
        prop_assert_eq!(derive_seed(master, &[a, b]), derive_seed(master, &[a, b]));
        if a != b {
            prop_assert_ne!(derive_seed(master, &[a]), derive_seed(master, &[b]));
        }
    }

    #[test]
    fn config_echo_round_trips(kind_idx in 0usize..7, trials in 1usize..50, seed in any::<u64>()) {
        let kind = ExperimentKind::ALL[kind_idx];
        let cfg = ExperimentConfig { trials, seed, ..ExperimentConfig::defaults(kind) };
        let back = ExperimentConfig::resolve(&parse_kv(&cfg.to_kv_string()).unwrap(), &Default::default()).unwrap();
        prop_assert_eq!(back, cfg);
    }
}
