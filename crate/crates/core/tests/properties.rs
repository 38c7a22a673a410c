use proptest::prelude::*;

use rwt_core::harness::config::{ExperimentConfig, ObjectiveConfig, PolicyKind, PolicySpec, TestParams};
use rwt_core::harness::output::{format_real, write_csv};
use rwt_core::harness::{SummaryRow, SummaryTable};
use rwt_core::policies::{regret_of, run_rwt, run_sgd, sgd_update, FinalPosition, SgdConfig, SgdInit, StepSchedule};
use rwt_core::problems::{FunctionClass, GradientOracle, NoiseModel, ObjectiveSpec, Term};
use rwt_core::sequential_tests::{
    heavytail_threshold, subgaussian_threshold, ConfidenceParam, HeavyTailTestConfig, SubGaussianTestConfig, TestConfig,
    TestSession,
};
use rwt_core::{DyadicPoint, NodeId};

fn node_strategy() -> impl Strategy<Value = NodeId> {
    (0u64..=62).prop_flat_map(|d| (Just(d), 1u64..=(1u64 << d))).prop_map(|(d, k)| NodeId::new(d, k).unwrap())
}

fn p_check() -> impl Strategy<Value = ConfidenceParam> {
    (0.01f64..0.2).prop_map(|p| ConfidenceParam::new(p).unwrap())
}

proptest! {
    #[test]
    fn children_tile_the_parent(n in node_strategy()) {
        let iv = n.interval();
        let (l, r) = (n.left_child().interval(), n.right_child().interval());
        prop_assert_eq!(&l.left, &iv.left);
        prop_assert_eq!(&l.right, &iv.mid);
        prop_assert_eq!(&r.left, &iv.mid);
        prop_assert_eq!(&r.right, &iv.right);
        prop_assert_eq!(n.left_child().parent(), n.clone());
        prop_assert_eq!(n.right_child().parent(), n.clone());
        prop_assert!(iv.left < iv.mid && iv.mid < iv.right);
        prop_assert_eq!(iv.length(), DyadicPoint::try_new(1u32, n.depth()).unwrap());
    }

    #[test]
    fn max_distance_is_an_endpoint_distance(n in node_strategy(), x in 0.0f64..=1.0) {
        let iv = n.interval();
        let d = n.max_distance_to(x);
        let want = (iv.left.to_f64() - x).abs().max((iv.right.to_f64() - x).abs());
        prop_assert_eq!(d, want);
        prop_assert!(d >= iv.length().to_f64() / 2.0 - 1e-15);
    }

    #[test]
    fn subgaussian_threshold_shrinks(s in 3u64..1_000_000, p in p_check(), s2 in 0.01f64..10.0) {
        let cfg = SubGaussianTestConfig::new(s2, p).unwrap();
        let a = subgaussian_threshold(s, &cfg).unwrap();
        let b = subgaussian_threshold(s + 1, &cfg).unwrap();
        prop_assert!(a > 0.0 && b <= a);
    }

    #[test]
    fn session_threshold_matches_direct_sum(s in 3u64..400, b in 1.1f64..2.0, u in 0.1f64..20.0, p in p_check()) {
        let cfg = HeavyTailTestConfig::new(b, u, p).unwrap();
        let mut session = TestSession::new();
        for _ in 0..s {
            let _ = session.ht_step(0.0, &cfg);
        }
        let direct = heavytail_threshold(s, &cfg).unwrap();
        prop_assert!((session.heavytail_threshold(&cfg) - direct).abs() <= 1e-10 * direct);
    }

    #[test]
    fn verdicts_flip_with_the_samples(samples in prop::collection::vec(-3.0f64..3.0, 3..400), p in p_check()) {
        let cfg = TestConfig::SubGaussian(SubGaussianTestConfig::new(0.05, p).unwrap());
        let (mut a, mut b) = (TestSession::new(), TestSession::new());
        for x in &samples {
            let va = a.step(*x, &cfg).unwrap();
            let vb = b.step(-*x, &cfg).unwrap();
            prop_assert_eq!(va.map(|v| v.flipped()), vb);
            if va.is_some() {
                break;
            }
        }
    }

    #[test]
    fn sgd_update_stays_in_domain(x in 0.0f64..=1.0, eta in 0.0f64..100.0, g in -1e6f64..1e6) {
        let y = sgd_update(x, eta, g);
        prop_assert!((0.0..=1.0).contains(&y));
    }

    #[test]
    fn regret_curves_are_monotone(seed in 0u64..1000, horizon in 1u64..3000, sqrt_schedule: bool) {
        let obj = ObjectiveSpec::power(4.0, 1.2, 0.2).unwrap();
        let noise = NoiseModel::Gaussian { sigma_sq: 1.0 };
        let test = TestConfig::SubGaussian(SubGaussianTestConfig::new(1.0, ConfidenceParam::new(0.2).unwrap()).unwrap());
        let rwt = run_rwt(&mut GradientOracle::seeded(obj.clone(), noise, seed).unwrap(), &test, horizon);
        let schedule = if sqrt_schedule { StepSchedule::InverseSqrtT } else { StepSchedule::COverT { c: 0.1 } };
        let sgd = run_sgd(
            &mut GradientOracle::seeded(obj, noise, seed).unwrap(),
            &SgdConfig { schedule, init: SgdInit::Uniform },
            horizon,
        ).unwrap();
        for tr in [&rwt, &sgd] {
            prop_assert_eq!(tr.len(), horizon);
            let cum = regret_of(tr);
            prop_assert!(cum[0] >= 0.0);
            prop_assert!(cum.windows(2).all(|w| w[1] >= w[0]));
        }
        if let FinalPosition::Node(n) = rwt.final_position() {
            prop_assert!(n.depth() <= rwt.moves());
        }
    }

    #[test]
    fn csv_reals_round_trip(v in prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO) {
        let table = SummaryTable::from_rows(vec![SummaryRow {
            policy: "p".into(),
            checkpoint_t: 1,
            mean_regret: v,
            stderr: v.abs(),
            num_runs: 1,
        }]);
        let mut buf = Vec::new();
        write_csv(&table, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let field = text.lines().nth(1).unwrap().split(',').nth(2).unwrap().to_string();
        prop_assert_eq!(field.parse::<f64>().unwrap().to_bits(), v.to_bits());
        prop_assert_eq!(field, format_real(v));
    }
}

fn term() -> impl Strategy<Value = Term> {
    (0.01f64..10.0, 1.0f64..3.0).prop_map(|(c, e)| Term::new(c, e))
}

fn objective() -> impl Strategy<Value = ObjectiveConfig> {
    let class = prop_oneof![
        Just(None),
        Just(Some(FunctionClass::Convex)),
        (0.01f64..5.0).prop_map(|alpha| Some(FunctionClass::StronglyConvex { alpha })),
        (0.01f64..5.0).prop_map(|delta| Some(FunctionClass::NonDiffAtOpt { delta })),
    ];
    (0.0f64..=1.0, prop::collection::vec(term(), 1..4), class)
        .prop_map(|(xstar, terms, fclass)| ObjectiveConfig { xstar, terms, fclass })
}

fn schedule() -> impl Strategy<Value = StepSchedule> {
    prop_oneof![
        (0.001f64..10.0).prop_map(|c| StepSchedule::COverT { c }),
        (0.001f64..10.0).prop_map(|alpha_hat| StepSchedule::InverseAlphaT { alpha_hat }),
        Just(StepSchedule::InverseSqrtT),
    ]
}

fn policy() -> impl Strategy<Value = PolicySpec> {
    (
        "[a-z][a-z0-9_]{0,12}",
        prop_oneof![Just(PolicyKind::Rwt), Just(PolicyKind::RwtCached), Just(PolicyKind::Sgd)],
        prop::option::of(0.01f64..0.2),
        prop::option::of(1usize..10),
        prop::option::of(schedule()),
        prop::option::of(0.0f64..=1.0),
        prop::option::of(objective()),
    )
        .prop_map(|(label, kind, p_check, cache, step, x1, objective)| PolicySpec {
            label,
            kind,
            p_check,
            cache,
            step,
            x1,
            objective,
        })
}

fn noise() -> impl Strategy<Value = NoiseModel> {
    prop_oneof![
        (0.0f64..10.0).prop_map(|sigma_sq| NoiseModel::Gaussian { sigma_sq }),
        (1.01f64..5.0, 0.01f64..10.0).prop_map(|(tail_index, scale)| NoiseModel::SymmetricPareto { tail_index, scale }),
    ]
}

fn config() -> impl Strategy<Value = ExperimentConfig> {
    (
        "[a-z][a-z0-9_]{0,12}",
        1u64..10_000_000,
        1u64..10_000,
        any::<u64>(),
        prop::option::of(prop::collection::vec(1u64..1000, 1..10)),
        any::<bool>(),
        objective(),
        noise(),
        (prop::option::of(0.01f64..10.0), prop::option::of(1.01f64..2.0), prop::option::of(0.01f64..50.0)),
        prop::collection::vec(policy(), 0..5),
    )
        .prop_map(|(name, horizon, num_runs, base_seed, checkpoints, log_axes, objective, noise, (s2, b, u), policies)| {
            ExperimentConfig {
                name,
                horizon,
                num_runs,
                base_seed,
                checkpoints,
                output_dir: None,
                log_axes,
                objective,
                noise,
                test: TestParams { sigma_sq: s2, b, u },
                policies,
            }
        })
}

proptest! {
    #[test]
    fn config_round_trips(cfg in config()) {
        let text = cfg.to_toml().unwrap();
        let back = ExperimentConfig::from_toml(&text).unwrap();
        prop_assert_eq!(back, cfg);
    }
}
