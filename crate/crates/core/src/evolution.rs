//! Dense statevector evolution and the scalar `f(s)` sampled by the
//! extrapolation schemes, where `s = 1/r` and `f(1/r)` is the observable
//! after `r` Trotter steps.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::seq::index;
use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::linalg::{self, c, CMatrix, CVector, HermitianEigen};
use crate::product_formula::{Propagator, StagedFormula};
use crate::rng;
use crate::terms::{Pauli, PauliString, TermSum};

const NORM_TOL: f64 = 1e-12;
const IMAG_TOL: f64 = 1e-10;

/// Normalized pure state.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: CVector,
}

impl StateVector {
    pub fn new(amplitudes: CVector) -> Result<Self> {
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(invalid(format!("state has norm {norm}, expected 1")));
        }
        if !amplitudes.len().is_power_of_two() {
            return Err(invalid(format!("state length {} is not a power of two", amplitudes.len())));
        }
        Ok(Self { amplitudes })
    }

    /// Computational basis state `|index>`; qubit 0 is the most significant bit.
    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        let dim = 1usize << n_qubits;
        if index >= dim {
            return Err(invalid(format!("basis index {index} outside dimension {dim}")));
        }
        let mut amplitudes = CVector::zeros(dim);
        amplitudes[index] = c(1.0);
        Ok(Self { amplitudes })
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }
}

/// Hermitian observable with its spectral norm.
#[derive(Debug, Clone)]
pub struct Observable {
    matrix: CMatrix,
    norm: f64,
}

impl Observable {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(invalid("observable must be square"));
        }
        let residual = linalg::hermitian_residual(&matrix);
        if residual > 1e-12 {
            return Err(invalid(format!("observable is not Hermitian (residual {residual:e})")));
        }
        let norm = linalg::spectral_norm(&matrix)?;
        Ok(Self { matrix, norm })
    }

    pub fn from_terms(terms: &TermSum) -> Result<Self> {
        Self::new(terms.hamiltonian())
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn expectation(&self, psi: &CVector) -> Result<f64> {
        let value = psi.dotc(&(&self.matrix * psi));
        if value.im.abs() > IMAG_TOL * self.norm.max(1.0) {
            return Err(Error::Conditioning(format!("expectation has imaginary part {:e}", value.im)));
        }
        Ok(value.re)
    }

    /// Smallest and largest eigenvalue.
    pub fn spectrum_bounds(&self) -> Result<(f64, f64)> {
        let eig = HermitianEigen::new(&self.matrix)?;
        Ok((eig.values.min(), eig.values.max()))
    }
}

fn check_dims(terms: &TermSum, state: &StateVector, obs: &Observable) -> Result<()> {
    let dim = terms.dim();
    if state.dim() != dim || obs.matrix().nrows() != dim {
        return Err(invalid(format!(
            "dimension mismatch: terms {dim}, state {}, observable {}",
            state.dim(),
            obs.matrix().nrows()
        )));
    }
    Ok(())
}

/// Exact evolution under the full Hamiltonian, reusable across times.
pub struct ExactEvolver {
    eigen: HermitianEigen,
}

impl ExactEvolver {
    pub fn new(terms: &TermSum) -> Result<Self> {
        Ok(Self { eigen: HermitianEigen::new(&terms.hamiltonian())? })
    }

    pub fn evolve(&self, big_t: f64, state: &StateVector) -> CVector {
        let v = &self.eigen.vectors;
        let mut coords = v.adjoint() * state.amplitudes();
        for (z, &lambda) in coords.iter_mut().zip(self.eigen.values.iter()) {
            *z *= Complex64::from_polar(1.0, -big_t * lambda);
        }
        v * coords
    }

    pub fn expectation(&self, big_t: f64, state: &StateVector, obs: &Observable) -> Result<f64> {
        obs.expectation(&self.evolve(big_t, state))
    }
}

/// `<psi| e^{iHT} O e^{-iHT} |psi>`.
pub fn exact_evolve_expectation(terms: &TermSum, big_t: f64, state: &StateVector, obs: &Observable) -> Result<f64> {
    check_dims(terms, state, obs)?;
    ExactEvolver::new(terms)?.expectation(big_t, state, obs)
}

/// Evaluates `f(1/r)` for a fixed formula, Hamiltonian, time, state and
/// observable. Shareable across threads; results do not depend on call order.
pub struct TrotterEvaluator<'a> {
    propagator: Propagator<'a>,
    exact: ExactEvolver,
    big_t: f64,
    state: StateVector,
    obs: Observable,
}

impl<'a> TrotterEvaluator<'a> {
    pub fn new(formula: &'a StagedFormula, terms: &'a TermSum, big_t: f64, state: StateVector, obs: Observable) -> Result<Self> {
        check_dims(terms, &state, &obs)?;
        Ok(Self { propagator: Propagator::new(formula, terms)?, exact: ExactEvolver::new(terms)?, big_t, state, obs })
    }

    pub fn big_t(&self) -> f64 {
        self.big_t
    }

    pub fn observable(&self) -> &Observable {
        &self.obs
    }

    pub fn state(&self) -> &StateVector {
        &self.state
    }

    pub fn propagator(&self) -> &Propagator<'a> {
        &self.propagator
    }

    /// State after `r` steps (negative `r` per [`Propagator::step`]).
    pub fn evolved_state(&self, r: i64) -> Result<CVector> {
        let step = self.propagator.step(r, self.big_t)?;
        let mut psi = self.state.amplitudes().clone();
        for _ in 0..r.unsigned_abs() {
            psi = &step * psi;
        }
        Ok(psi)
    }

    pub fn value(&self, r: i64) -> Result<f64> {
        self.obs.expectation(&self.evolved_state(r)?)
    }

    /// `f(0)`: the ideal expectation value.
    pub fn exact(&self) -> Result<f64> {
        self.exact.expectation(self.big_t, &self.state, &self.obs)
    }

    /// `f(s)` for `s = 0` or `s = 1/r` with integer `r`.
    pub fn value_at_s(&self, s: f64) -> Result<f64> {
        if s == 0.0 {
            return self.exact();
        }
        let r = (1.0 / s).round();
        if ((1.0 / r) - s).abs() > 1e-12 * s.abs() {
            return Err(invalid(format!("s = {s} is not the inverse of an integer")));
        }
        self.value(r as i64)
    }
}

/// `<psi| P^{r dagger}(T/r) O P^r(T/r) |psi>`.
pub fn trotter_expectation(
    f: &StagedFormula,
    terms: &TermSum,
    r: i64,
    big_t: f64,
    state: &StateVector,
    obs: &Observable,
) -> Result<f64> {
    check_dims(terms, state, obs)?;
    let propagator = Propagator::new(f, terms)?;
    let step = propagator.step(r, big_t)?;
    let mut psi = state.amplitudes().clone();
    for _ in 0..r.unsigned_abs() {
        psi = &step * psi;
    }
    obs.expectation(&psi)
}

/// Taylor coefficients `f^{(j)}(0)/j!` estimated from inverse-integer samples.
#[derive(Debug, Clone)]
pub struct TaylorEstimate {
    /// Index `j` holds the estimate of the `s^j` coefficient; index 0 is `f(0)`.
    pub coefficients: Vec<f64>,
    /// Change in each coefficient between the coarse and refined stencil.
    pub errors: Vec<f64>,
    /// Signed step counts of the refined stencil (zero stands for `s = 0`).
    pub nodes: Vec<i64>,
}

fn snapped_stencil(half_width: usize, h: f64) -> Result<Vec<i64>> {
    let mut nodes = vec![0i64];
    for i in 1..=half_width {
        let r = (1.0 / (i as f64 * h)).round().max(1.0) as i64;
        nodes.push(r);
        nodes.push(-r);
    }
    let mut sorted = nodes.clone();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != nodes.len() {
        return Err(Error::StencilDegeneracy(format!(
            "stencil step h={h} with {half_width} points per side collides after rounding to integer step counts"
        )));
    }
    Ok(nodes)
}

fn polynomial_through(nodes: &[i64], values: &[f64]) -> Result<Vec<f64>> {
    let s: Vec<f64> = nodes.iter().map(|&r| if r == 0 { 0.0 } else { 1.0 / r as f64 }).collect();
    let scale = s.iter().fold(0.0_f64, |a, &v| a.max(v.abs()));
    let n = nodes.len();
    let design = DMatrix::from_fn(n, n, |i, j| (s[i] / scale).powi(j as i32));
    let rhs = nalgebra::DVector::from_column_slice(values);
    let solved = design
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::StencilDegeneracy("singular finite-difference system".into()))?;
    Ok(solved.iter().enumerate().map(|(j, &v)| v / scale.powi(j as i32)).collect())
}

impl TrotterEvaluator<'_> {
    /// Taylor coefficients of `f` at `s = 0` up to `j_max` from a symmetric
    /// stencil with spacing `h` snapped to inverse integers, refined once to
    /// spacing `h/2` for the error estimate.
    pub fn taylor_coefficients_fd(&self, j_max: usize, h: f64) -> Result<TaylorEstimate> {
        if j_max == 0 || j_max > 6 {
            return Err(invalid(format!("j_max must lie in 1..=6, got {j_max}")));
        }
        if !(h > 0.0 && h <= 0.5) {
            return Err(invalid(format!("stencil step must lie in (0, 0.5], got {h}")));
        }
        let half_width = j_max / 2 + 1;
        let estimate = |step: f64| -> Result<(Vec<f64>, Vec<i64>)> {
            let nodes = snapped_stencil(half_width, step)?;
            let values = nodes
                .iter()
                .map(|&r| if r == 0 { self.exact() } else { self.value(r) })
                .collect::<Result<Vec<_>>>()?;
            let mut coeffs = polynomial_through(&nodes, &values)?;
            coeffs.truncate(j_max + 1);
            Ok((coeffs, nodes))
        };
        let (coarse, _) = estimate(h)?;
        let (fine, nodes) = estimate(0.5 * h)?;
        let errors = coarse.iter().zip(&fine).map(|(a, b)| (a - b).abs()).collect();
        Ok(TaylorEstimate { coefficients: fine, errors, nodes })
    }
}

pub fn taylor_coefficients_fd(
    f: &StagedFormula,
    terms: &TermSum,
    big_t: f64,
    state: &StateVector,
    obs: &Observable,
    j_max: usize,
    h: f64,
) -> Result<TaylorEstimate> {
    TrotterEvaluator::new(f, terms, big_t, state.clone(), obs.clone())?.taylor_coefficients_fd(j_max, h)
}

/// Computational basis state with uniformly random bits.
pub fn random_bitstring_state(n_qubits: usize, seed: u64) -> Result<StateVector> {
    if n_qubits == 0 || n_qubits > 16 {
        return Err(invalid(format!("unsupported qubit count {n_qubits}")));
    }
    let mut rng = rng::stream(seed, "bitstring_state");
    let index = (0..n_qubits).fold(0usize, |acc, _| (acc << 1) | rng.random_range(0..2usize));
    StateVector::basis(n_qubits, index)
}

/// Sum of `n_terms` distinct non-identity Pauli strings with unit coefficients.
pub fn random_pauli_observable(n_qubits: usize, n_terms: usize, seed: u64) -> Result<Observable> {
    Observable::from_terms(&random_pauli_terms(n_qubits, n_terms, seed)?)
}

/// The Pauli strings behind [`random_pauli_observable`].
pub fn random_pauli_terms(n_qubits: usize, n_terms: usize, seed: u64) -> Result<TermSum> {
    if n_terms == 0 {
        return Err(invalid("observable needs at least one Pauli string"));
    }
    if n_qubits == 0 || n_qubits > 12 {
        return Err(invalid(format!("unsupported qubit count {n_qubits}")));
    }
    let available = 4usize.pow(n_qubits as u32) - 1;
    if n_terms > available {
        return Err(invalid(format!("only {available} distinct non-identity Pauli strings on {n_qubits} qubits")));
    }
    let mut rng = rng::stream(seed, "pauli_observable");
    let axes = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];
    let strings = index::sample(&mut rng, available, n_terms)
        .into_iter()
        .map(|code| {
            let mut code = code + 1;
            let mut word = vec![Pauli::I; n_qubits];
            for slot in word.iter_mut().rev() {
                *slot = axes[code % 4];
                code /= 4;
            }
            PauliString::new(word, 1.0)
        })
        .collect::<Result<Vec<_>>>()?;
    TermSum::from_paulis(n_qubits, strings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::product_formula::{first_order, iterated_unitary, suzuki};
    use crate::terms::heisenberg_chain;

    fn xz() -> TermSum {
        TermSum::from_paulis(1, vec!["X".parse().unwrap(), "Z".parse().unwrap()]).unwrap()
    }

    fn z_obs() -> Observable {
        Observable::new(Pauli::Z.matrix()).unwrap()
    }

    #[test]
    fn exact_expectation_basics() {
        let h = heisenberg_chain(3, 4).unwrap();
        let psi = random_bitstring_state(3, 9).unwrap();
        let obs = random_pauli_observable(3, 3, 2).unwrap();
        let at_zero = exact_evolve_expectation(&h, 0.0, &psi, &obs).unwrap();
        assert!((at_zero - obs.expectation(psi.amplitudes()).unwrap()).abs() < 1e-12);
        let id = Observable::new(linalg::identity(8)).unwrap();
        assert!((exact_evolve_expectation(&h, 1.7, &psi, &id).unwrap() - 1.0).abs() < 1e-12);
        let energy = Observable::from_terms(&h).unwrap();
        let e0 = exact_evolve_expectation(&h, 0.0, &psi, &energy).unwrap();
        let e1 = exact_evolve_expectation(&h, 2.3, &psi, &energy).unwrap();
        assert!((e0 - e1).abs() < 1e-11);
    }

    fn first_order_error_ratio(obs: &Observable) -> f64 {
        let t = xz();
        let f = first_order(2).unwrap();
        let psi = StateVector::basis(1, 0).unwrap();
        let exact = exact_evolve_expectation(&t, 1.0, &psi, obs).unwrap();
        let e10 = trotter_expectation(&f, &t, 10, 1.0, &psi, obs).unwrap() - exact;
        let e20 = trotter_expectation(&f, &t, 20, 1.0, &psi, obs).unwrap() - exact;
        e10 / e20
    }

    #[test]
    fn first_order_error_ratio_depends_on_observable() {
        let ratio = first_order_error_ratio(&Observable::new(Pauli::Y.matrix()).unwrap());
        assert!((ratio - 2.0).abs() < 0.05, "ratio {ratio}");
        // Real H, state and observable: the O(s) term cancels under complex conjugation.
        let ratio = first_order_error_ratio(&z_obs());
        assert!((ratio - 4.0).abs() < 0.05, "ratio {ratio}");
        let psi = StateVector::basis(1, 0).unwrap();
        assert!(trotter_expectation(&first_order(2).unwrap(), &xz(), 0, 1.0, &psi, &z_obs()).is_err());
    }

    #[test]
    fn vector_and_matrix_routes_agree() {
        let h = heisenberg_chain(2, 1).unwrap();
        let f = suzuki(1, h.gamma()).unwrap();
        let psi = random_bitstring_state(2, 5).unwrap();
        let obs = random_pauli_observable(2, 2, 5).unwrap();
        for r in [-4, 3, 7] {
            let u = iterated_unitary(&f, &h, r, 1.3).unwrap();
            let via_matrix = obs.expectation(&(u * psi.amplitudes())).unwrap();
            let via_vector = trotter_expectation(&f, &h, r, 1.3, &psi, &obs).unwrap();
            assert!((via_matrix - via_vector).abs() < 1e-10);
        }
    }

    #[test]
    fn symmetric_formula_is_even_in_s() {
        let h = heisenberg_chain(3, 2).unwrap();
        let f = suzuki(1, h.gamma()).unwrap();
        let ev = TrotterEvaluator::new(&f, &h, 1.0, random_bitstring_state(3, 1).unwrap(), random_pauli_observable(3, 3, 1).unwrap()).unwrap();
        for r in [3, 5, 8] {
            assert!((ev.value(r).unwrap() - ev.value(-r).unwrap()).abs() < 1e-10);
        }
        assert!((ev.value_at_s(0.2).unwrap() - ev.value(5).unwrap()).abs() == 0.0);
        assert!(ev.value_at_s(0.3).is_err());
    }

    #[test]
    fn taylor_coefficients_of_symmetric_formula() {
        let h = heisenberg_chain(2, 3).unwrap();
        let f = suzuki(1, h.gamma()).unwrap();
        let est = taylor_coefficients_fd(
            &f,
            &h,
            0.5,
            &random_bitstring_state(2, 3).unwrap(),
            &random_pauli_observable(2, 3, 3).unwrap(),
            4,
            0.1,
        )
        .unwrap();
        assert_eq!(est.coefficients.len(), 5);
        for j in [1, 3] {
            assert!(est.coefficients[j].abs() < 1e-6, "c_{j} = {}", est.coefficients[j]);
        }
    }

    #[test]
    fn stencil_collisions_are_reported() {
        assert!(matches!(snapped_stencil(4, 0.45), Err(Error::StencilDegeneracy(_))));
        assert_eq!(snapped_stencil(2, 0.1).unwrap(), vec![0, 10, -10, 5, -5]);
    }

    #[test]
    fn random_constructors() {
        assert_eq!(random_bitstring_state(4, 7).unwrap(), random_bitstring_state(4, 7).unwrap());
        assert_eq!(StateVector::basis(1, 0).unwrap().amplitudes().as_slice(), &[c(1.0), c(0.0)]);
        assert!((random_pauli_observable(3, 1, 4).unwrap().norm() - 1.0).abs() < 1e-12);
        let obs = random_pauli_observable(6, 3, 8).unwrap();
        assert!(obs.norm() <= 3.0 + 1e-12);
        assert!(linalg::hermitian_residual(obs.matrix()) <= 1e-14);
        assert!(random_pauli_observable(2, 0, 0).is_err());
        assert!(StateVector::new(CVector::from_element(2, c(1.0))).is_err());
    }
}
