use proptest::prelude::*;
use trotter_core::evolution::{random_bitstring_state, random_pauli_observable, random_pauli_terms, TrotterEvaluator};
use trotter_core::linalg::{commutator, identity, max_abs};
use trotter_core::product_formula::{first_order, iterated_unitary, suzuki};
use trotter_core::terms::{alpha_comm, heisenberg_chain, nested_commutator, NormMode, TermSum};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn trotter_products_are_unitary(seed in any::<u64>(), r in 1i64..6, t in 0.0f64..3.0, k in 1usize..=2) {
        let terms = random_pauli_terms(3, 4, seed).unwrap();
        let formula = suzuki(k, terms.gamma()).unwrap();
        let u = iterated_unitary(&formula, &terms, r, t).unwrap();
        let defect = max_abs(&(u.adjoint() * &u - identity(terms.dim())));
        prop_assert!(defect < 1e-11, "defect {}", defect);
    }

    #[test]
    fn expectation_is_bounded_by_observable_norm(seed in any::<u64>(), r in -6i64..=6, t in 0.0f64..2.0) {
        prop_assume!(r != 0);
        let terms = heisenberg_chain(3, seed).unwrap();
        let formula = first_order(terms.gamma()).unwrap();
        let state = random_bitstring_state(3, seed ^ 1).unwrap();
        let obs = random_pauli_observable(3, 3, seed ^ 2).unwrap();
        let norm = obs.norm();
        let eval = TrotterEvaluator::new(&formula, &terms, t, state, obs).unwrap();
        prop_assert!(eval.value(r).unwrap().abs() <= norm * (1.0 + 1e-12));
        prop_assert!(eval.exact().unwrap().abs() <= norm * (1.0 + 1e-12));
    }

    #[test]
    fn symmetric_formula_is_even_in_r(seed in any::<u64>(), r in 1i64..8, t in 0.1f64..2.0) {
        let terms = heisenberg_chain(3, seed).unwrap();
        let formula = suzuki(1, terms.gamma()).unwrap();
        let state = random_bitstring_state(3, seed ^ 3).unwrap();
        let obs = random_pauli_observable(3, 2, seed ^ 4).unwrap();
        let eval = TrotterEvaluator::new(&formula, &terms, t, state, obs).unwrap();
        prop_assert!((eval.value(r).unwrap() - eval.value(-r).unwrap()).abs() < 1e-11);
    }

    #[test]
    fn commutator_is_antisymmetric(seed in any::<u64>(), a in 0usize..4, b in 0usize..4) {
        let terms = random_pauli_terms(2, 4, seed).unwrap();
        let ab = nested_commutator(&terms, &[a, b]).unwrap();
        let ba = nested_commutator(&terms, &[b, a]).unwrap();
        prop_assert!(max_abs(&(ab + ba)) < 1e-12);
        let direct = commutator(terms.dense(a), terms.dense(b));
        prop_assert!(max_abs(&(direct - nested_commutator(&terms, &[a, b]).unwrap())) < 1e-12);
    }

    #[test]
    fn bound_mode_dominates_exact_alpha(seed in any::<u64>(), j in 1usize..=3) {
        let terms = random_pauli_terms(2, 3, seed).unwrap();
        let exact = alpha_comm(&terms, j, NormMode::Exact).unwrap();
        let bound = alpha_comm(&terms, j, NormMode::Bound).unwrap();
        prop_assert!(exact <= bound * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn term_sum_json_round_trip(seed in any::<u64>()) {
        let terms = heisenberg_chain(3, seed).unwrap();
        let back = TermSum::from_json(&terms.to_json().unwrap()).unwrap();
        prop_assert!(max_abs(&(back.hamiltonian() - terms.hamiltonian())) == 0.0);
    }
}

fn trotter_error(order_k: Option<usize>, r: i64) -> f64 {
    let terms = heisenberg_chain(3, 11).unwrap();
    let formula = match order_k {
        None => first_order(terms.gamma()).unwrap(),
        Some(k) => suzuki(k, terms.gamma()).unwrap(),
    };
    let state = random_bitstring_state(3, 5).unwrap();
    let obs = random_pauli_observable(3, 3, 6).unwrap();
    let eval = TrotterEvaluator::new(&formula, &terms, 1.0, state, obs).unwrap();
    (eval.value(r).unwrap() - eval.exact().unwrap()).abs()
}

#[test]
fn error_decreases_at_the_formula_order() {
    // Doubling r shrinks the error by roughly 2^p (or 2^{p+1} after cancellations).
    for (k, p) in [(Some(1), 2.0), (Some(2), 4.0)] {
        let ratio = trotter_error(k, 8) / trotter_error(k, 16);
        let slope = ratio.log2();
        assert!(slope > p - 0.3, "k={k:?}: slope {slope}");
    }
    let slope = (trotter_error(None, 16) / trotter_error(None, 32)).log2();
    assert!(slope > 0.7, "first order slope {slope}");
}
