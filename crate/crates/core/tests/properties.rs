use edrlab::explorer::{run_sweep, Spacing, SweepRange, SweepSpec};
use edrlab::measurement::{optimal_estimator, perturb_estimator, EstimatorChoice};
use edrlab::models::random::random_state;
use edrlab::models::{build_random_model, StateSpec};
use edrlab::sampler::sample_counts;
use edrlab::{BuilderSpec, Estimator, InequalityId, ReadoutFrame};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn dims() -> impl Strategy<Value = (usize, usize)> {
    (2usize..=4, 2usize..=4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn universal_relations_hold((d_obj, d_probe) in dims(), seed in any::<u64>(), c in -2.0f64..2.0) {
        let m = build_random_model(d_obj, d_probe, seed).unwrap();
        let frame = ReadoutFrame::new(&m).unwrap();
        let phi = random_state(&mut ChaCha8Rng::seed_from_u64(seed ^ 0x5eed), d_obj);
        let opt = optimal_estimator(&frame.conditional_states(&phi).unwrap(), &m.x0).unwrap();
        for f in [opt, Estimator::identity(frame.readouts()), Estimator::constant(frame.readouts(), c)] {
            let r = frame.report(&phi, "p", &f, 1e-9).unwrap();
            prop_assert!(r.get(InequalityId::EQ3).slack >= -1e-9);
            prop_assert!(r.get(InequalityId::EQ19).slack >= -1e-9);
            let b = &r.metrics;
            prop_assert!((b.epsilon_xt - b.epsilon_xt_conditional).abs() <= 1e-10);
            for p in &b.per_readout {
                let split = p.sigma.powi(2) + (p.mean - p.value).powi(2);
                prop_assert!((p.epsilon.powi(2) - split).abs() <= 1e-10);
            }
            if b.unbias_residual <= 1e-9 {
                prop_assert!(r.get(InequalityId::EQ4).slack >= -1e-9);
            }
        }
    }

    #[test]
    fn optimal_estimator_is_minimal(
        (d_obj, d_probe) in dims(),
        seed in any::<u64>(),
        scale in prop::sample::select(vec![1e-3, 1e-1, 1.0]),
    ) {
        let m = build_random_model(d_obj, d_probe, seed).unwrap();
        let frame = ReadoutFrame::new(&m).unwrap();
        let phi = random_state(&mut ChaCha8Rng::seed_from_u64(!seed), d_obj);
        let opt = optimal_estimator(&frame.conditional_states(&phi).unwrap(), &m.x0).unwrap();
        let b = frame.metrics(&phi, &opt).unwrap();
        prop_assert!((b.mean_estimate - b.mean_xt).abs() <= 1e-10);
        for k in 0..10 {
            let g = perturb_estimator(&opt, seed.wrapping_add(k), scale).unwrap();
            prop_assert!(frame.resolution(&phi, &g).unwrap() >= b.epsilon_xt - 1e-12);
        }
    }

    #[test]
    fn counts_sum_to_n(n in 1u64..50_000, seed in any::<u64>(), raw in prop::collection::vec(0.0f64..1.0, 1..6)) {
        let total: f64 = raw.iter().sum();
        prop_assume!(total > 1e-3);
        let p: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let counts = sample_counts(&p, n, seed).unwrap();
        prop_assert_eq!(counts.iter().sum::<u64>(), n);
        prop_assert_eq!(counts, sample_counts(&p, n, seed).unwrap());
    }
}

#[test]
fn optimal_resolution_follows_the_gaussian_estimate() {
    let spec = SweepSpec {
        base: BuilderSpec::new("von_neumann"),
        param: "probe_width".into(),
        range: SweepRange {
            from: 0.25,
            to: 2.0,
            steps: 7,
            spacing: Spacing::Log,
        },
        state: Some(StateSpec::Gaussian {
            center: 0.0,
            width: 1.0,
        }),
        estimator: EstimatorChoice::Optimal,
        record: vec![InequalityId::EQ4],
        tol: None,
    };
    let table = run_sweep(&spec).unwrap();
    let eps: Vec<f64> = table
        .rows
        .iter()
        .map(|r| r.report.metrics.epsilon_xt)
        .collect();
    assert!(eps.windows(2).all(|w| w[1] > w[0]), "{eps:?}");
    for row in &table.rows {
        let s = row.value;
        let want = s / (1.0 + s * s).sqrt();
        let got = row.report.metrics.epsilon_xt;
        assert!((got - want).abs() <= 1e-3, "s={s}: {got} vs {want}");
    }
}
