use proptest::prelude::*;
use trotter_core::evolution::{random_bitstring_state, random_pauli_observable};
use trotter_core::measurement::{
    hoeffding_samples, iqae_grover_calls, make_budget, resource_report, shadows_samples, simulate_incoherent,
    simulate_noisy_eval, ShotSampler,
};

proptest! {
    #[test]
    fn sample_counts_shrink_as_tolerance_loosens(eps in 1e-3f64..0.5, delta in 1e-4f64..0.5) {
        prop_assert!(hoeffding_samples(eps, delta).unwrap() >= hoeffding_samples(eps * 1.5, delta).unwrap());
        prop_assert!(iqae_grover_calls(eps, 4, delta).unwrap() >= iqae_grover_calls(eps * 1.5, 4, delta).unwrap());
        prop_assert!(shadows_samples(eps, delta, 3, 1.0).unwrap() >= shadows_samples(eps * 1.5, delta, 3, 1.0).unwrap());
    }

    #[test]
    fn budget_splits_the_total(eps in 1e-6f64..1.0, amp in 1.0f64..100.0) {
        let b = make_budget(eps, amp).unwrap();
        prop_assert!(b.eps_ext + b.amplification * b.eps_data <= eps * (1.0 + 1e-12));
    }

    #[test]
    fn resource_report_counts_absolute_steps(nodes in prop::collection::vec(-50i64..50, 1..6), reps in 1u64..100) {
        prop_assume!(nodes.iter().all(|&r| r != 0));
        let report = resource_report(&nodes, reps).unwrap();
        prop_assert_eq!(report.d_max, nodes.iter().map(|r| r.unsigned_abs()).max().unwrap());
        prop_assert_eq!(report.c_trot, reps * nodes.iter().map(|r| r.unsigned_abs()).sum::<u64>());
    }

    #[test]
    fn noisy_eval_stays_within_eps(value in -1.0f64..1.0, eps in 0.0f64..0.1, seed in any::<u64>()) {
        let noisy = simulate_noisy_eval(value, eps, seed).unwrap();
        prop_assert!((noisy - value).abs() <= eps);
    }

    #[test]
    fn shot_means_are_reproducible_and_bounded(seed in any::<u64>(), shots in 1u64..500) {
        let obs = random_pauli_observable(3, 3, seed).unwrap();
        let state = random_bitstring_state(3, seed ^ 9).unwrap();
        let a = simulate_incoherent(&obs, &state, shots, seed).unwrap();
        prop_assert_eq!(a, simulate_incoherent(&obs, &state, shots, seed).unwrap());
        let (lo, hi) = obs.spectrum_bounds().unwrap();
        prop_assert!(a >= lo - 1e-12 && a <= hi + 1e-12);
    }

    #[test]
    fn rescaled_outcomes_lie_in_unit_interval(seed in any::<u64>()) {
        let obs = random_pauli_observable(2, 2, seed).unwrap();
        let sampler = ShotSampler::rescaled_unit(&obs).unwrap();
        let (lo, hi) = obs.spectrum_bounds().unwrap();
        prop_assert!((sampler.map_outcome(lo) + 1.0).abs() < 1e-12);
        prop_assert!((sampler.map_outcome(hi) - 1.0).abs() < 1e-12);
    }
}

#[test]
fn sampler_mean_matches_expectation() {
    let obs = random_pauli_observable(3, 3, 21).unwrap();
    let state = random_bitstring_state(3, 22).unwrap();
    let sampler = ShotSampler::new(&obs).unwrap();
    let expected = obs.expectation(state.amplitudes()).unwrap();
    assert!((sampler.mean(&state).unwrap() - expected).abs() < 1e-12);
    let estimate = simulate_incoherent(&obs, &state, 200_000, 1).unwrap();
    assert!((estimate - expected).abs() < 6.0 * obs.norm() / (200_000f64).sqrt());
}
