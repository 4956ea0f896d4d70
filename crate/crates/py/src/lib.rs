use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use trotter_core::chebyshev;
use trotter_core::evolution::{self, Observable, StateVector};
use trotter_core::experiment::{self, ExperimentConfig};
use trotter_core::linalg::CMatrix;
use trotter_core::measurement;
use trotter_core::product_formula::{self, FormulaDescriptor, FormulaKind, StagedFormula};
use trotter_core::richardson;
use trotter_core::terms::{self, NormMode};

fn py_err(e: trotter_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_rows(m: &CMatrix) -> Vec<Vec<Complex64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

fn norm_mode(exact: bool) -> NormMode {
    if exact {
        NormMode::Exact
    } else {
        NormMode::Bound
    }
}

/// A Hamiltonian split into terms `H = sum_g H_g`.
#[pyclass(name = "TermSum", frozen)]
struct PyTermSum(terms::TermSum);

#[pymethods]
impl PyTermSum {
    #[staticmethod]
    fn heisenberg_chain(length: usize, seed: u64) -> PyResult<Self> {
        terms::heisenberg_chain(length, seed).map(Self).map_err(py_err)
    }

    /// Pauli terms given as `(label, coefficient)` pairs, e.g. `("XZ", 0.5)`.
    #[staticmethod]
    fn from_paulis(n_qubits: usize, paulis: Vec<(String, f64)>) -> PyResult<Self> {
        let strings = paulis
            .iter()
            .map(|(label, c)| terms::PauliString::parse(label, *c))
            .collect::<trotter_core::Result<Vec<_>>>()
            .map_err(py_err)?;
        terms::TermSum::from_paulis(n_qubits, strings).map(Self).map_err(py_err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        terms::TermSum::from_json(text).map(Self).map_err(py_err)
    }

    fn to_json(&self) -> PyResult<String> {
        self.0.to_json().map_err(py_err)
    }

    #[getter]
    fn n_qubits(&self) -> usize {
        self.0.n_qubits()
    }

    #[getter]
    fn gamma(&self) -> usize {
        self.0.gamma()
    }

    fn term_norms(&self) -> Vec<f64> {
        self.0.term_norms()
    }

    fn hamiltonian(&self) -> Vec<Vec<Complex64>> {
        to_rows(&self.0.hamiltonian())
    }

    #[pyo3(signature = (j, exact = true))]
    fn alpha_comm(&self, j: usize, exact: bool) -> PyResult<f64> {
        terms::alpha_comm(&self.0, j, norm_mode(exact)).map_err(py_err)
    }

    #[pyo3(signature = (p, sigma, m, k_terms, exact = false))]
    fn lambda_param(&self, p: usize, sigma: usize, m: usize, k_terms: usize, exact: bool) -> PyResult<f64> {
        terms::lambda_param(&self.0, p, sigma, m, k_terms, norm_mode(exact))
            .map(|r| r.value)
            .map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!("TermSum(n_qubits={}, gamma={})", self.0.n_qubits(), self.0.gamma())
    }
}

/// A staged product formula (first order or Suzuki of order 2k).
#[pyclass(name = "ProductFormula", frozen)]
struct PyFormula(StagedFormula);

#[pymethods]
impl PyFormula {
    #[staticmethod]
    fn first_order(gamma_count: usize) -> PyResult<Self> {
        product_formula::first_order(gamma_count).map(Self).map_err(py_err)
    }

    #[staticmethod]
    fn suzuki(k: usize, gamma_count: usize) -> PyResult<Self> {
        product_formula::suzuki(k, gamma_count).map(Self).map_err(py_err)
    }

    #[getter]
    fn order(&self) -> usize {
        self.0.order()
    }

    #[getter]
    fn stages(&self) -> usize {
        self.0.stages()
    }

    #[getter]
    fn sigma(&self) -> usize {
        self.0.sigma()
    }

    #[getter]
    fn a_max(&self) -> f64 {
        self.0.a_max()
    }

    fn unitary(&self, terms: &PyTermSum, t: f64) -> PyResult<Vec<Vec<Complex64>>> {
        product_formula::unitary(&self.0, &terms.0, t).map(|u| to_rows(&u)).map_err(py_err)
    }

    fn effective_hamiltonian(&self, terms: &PyTermSum, t: f64) -> PyResult<Vec<Vec<Complex64>>> {
        product_formula::effective_hamiltonian(&self.0, &terms.0, t)
            .map(|h| to_rows(&h))
            .map_err(py_err)
    }

    fn __repr__(&self) -> String {
        let d = self.0.descriptor();
        let kind = match d.kind {
            FormulaKind::FirstOrder => "first_order",
            FormulaKind::Suzuki => "suzuki",
        };
        format!("ProductFormula(kind={kind}, k={}, gamma={}, order={})", d.k, d.gamma_count, self.0.order())
    }
}

#[pyclass(name = "RichardsonPlan", frozen)]
struct PyRichardsonPlan(richardson::RichardsonPlan);

#[pymethods]
impl PyRichardsonPlan {
    #[new]
    #[pyo3(signature = (m, r_scale, eta = 2))]
    fn new(m: usize, r_scale: u64, eta: u32) -> PyResult<Self> {
        richardson::make_plan(m, r_scale, eta).map(Self).map_err(py_err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        richardson::RichardsonPlan::from_json(text).map(Self).map_err(py_err)
    }

    fn to_json(&self) -> PyResult<String> {
        self.0.to_json().map_err(py_err)
    }

    #[getter]
    fn nodes(&self) -> Vec<u64> {
        self.0.nodes().to_vec()
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.0.weights().to_vec()
    }

    #[getter]
    fn one_norm(&self) -> f64 {
        self.0.one_norm()
    }

    fn extrapolate(&self, values: Vec<f64>) -> PyResult<f64> {
        self.0.extrapolate(&values).map_err(py_err)
    }
}

#[pyclass(name = "InterpolationPlan", frozen)]
struct PyInterpolationPlan(chebyshev::InterpolationPlan);

#[pymethods]
impl PyInterpolationPlan {
    #[new]
    fn new(m: usize, ell: f64) -> PyResult<Self> {
        chebyshev::InterpolationPlan::new(m, ell).map(Self).map_err(py_err)
    }

    #[getter]
    fn snapped_nodes(&self) -> Vec<i64> {
        self.0.snapped_nodes().to_vec()
    }

    #[getter]
    fn raw_nodes(&self) -> Vec<f64> {
        self.0.raw_nodes().to_vec()
    }

    #[getter]
    fn lebesgue_snapped(&self) -> f64 {
        self.0.lebesgue_snapped()
    }

    fn estimate(&self, values: Vec<f64>) -> PyResult<f64> {
        self.0.estimate(&values).map_err(py_err)
    }

    fn to_json(&self) -> PyResult<String> {
        self.0.to_json().map_err(py_err)
    }
}

/// `<psi| P^r(T/r)^dagger O P^r(T/r) |psi>` for a computational basis state
/// and a Pauli-sum observable given as `(label, coefficient)` pairs.
#[pyfunction]
fn trotter_expectation(
    formula: &PyFormula,
    terms: &PyTermSum,
    r: i64,
    big_t: f64,
    basis_index: usize,
    observable: &PyTermSum,
) -> PyResult<f64> {
    let state = StateVector::basis(terms.0.n_qubits(), basis_index).map_err(py_err)?;
    let obs = Observable::from_terms(&observable.0).map_err(py_err)?;
    evolution::trotter_expectation(&formula.0, &terms.0, r, big_t, &state, &obs).map_err(py_err)
}

#[pyfunction]
fn exact_expectation(terms: &PyTermSum, big_t: f64, basis_index: usize, observable: &PyTermSum) -> PyResult<f64> {
    let state = StateVector::basis(terms.0.n_qubits(), basis_index).map_err(py_err)?;
    let obs = Observable::from_terms(&observable.0).map_err(py_err)?;
    evolution::exact_evolve_expectation(&terms.0, big_t, &state, &obs).map_err(py_err)
}

#[pyfunction]
fn interpolate_at_zero(nodes: Vec<f64>, values: Vec<f64>) -> PyResult<f64> {
    chebyshev::interpolate_at_zero(&nodes, &values).map_err(py_err)
}

#[pyfunction]
fn hoeffding_samples(eps_data: f64, delta_prime: f64) -> PyResult<u64> {
    measurement::hoeffding_samples(eps_data, delta_prime).map_err(py_err)
}

#[pyfunction]
fn iqae_grover_calls(eps_data: f64, m: usize, delta: f64) -> PyResult<u64> {
    measurement::iqae_grover_calls(eps_data, m, delta).map_err(py_err)
}

#[pyfunction]
fn shadows_samples(eps_data: f64, delta: f64, num_observables: usize, max_norm: f64) -> PyResult<u64> {
    measurement::shadows_samples(eps_data, delta, num_observables, max_norm).map_err(py_err)
}

/// Runs an experiment config (JSON text) and returns the CSV table.
#[pyfunction]
#[pyo3(signature = (config_json, seed = 0))]
fn run_experiment(py: Python<'_>, config_json: &str, seed: u64) -> PyResult<String> {
    let config = ExperimentConfig::from_json(config_json).map_err(py_err)?;
    let table = py
        .detach(|| experiment::run_error_vs_m_multi_t(&config, seed))
        .map_err(py_err)?;
    table.to_csv_string().map_err(py_err)
}

/// Runs one acceptance criterion and returns `(passed, line)`.
#[pyfunction]
#[pyo3(signature = (id, seed = 0))]
fn run_criterion(py: Python<'_>, id: u32, seed: u64) -> PyResult<(bool, String)> {
    let verdict = py
        .detach(|| trotter_core::acceptance::run_criterion(id, seed))
        .ok_or_else(|| PyValueError::new_err(format!("no criterion {id}")))?;
    Ok((verdict.passed, verdict.line()))
}

#[pyfunction]
fn formula_descriptor_json(kind: &str, k: usize, gamma_count: usize) -> PyResult<String> {
    let kind: FormulaKind = serde_json::from_value(serde_json::Value::String(kind.into()))
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    let descriptor = FormulaDescriptor { kind, k, gamma_count };
    descriptor.build().map_err(py_err)?;
    serde_json::to_string(&descriptor).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pymodule]
fn trotter_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTermSum>()?;
    m.add_class::<PyFormula>()?;
    m.add_class::<PyRichardsonPlan>()?;
    m.add_class::<PyInterpolationPlan>()?;
    m.add_function(wrap_pyfunction!(trotter_expectation, m)?)?;
    m.add_function(wrap_pyfunction!(exact_expectation, m)?)?;
    m.add_function(wrap_pyfunction!(interpolate_at_zero, m)?)?;
    m.add_function(wrap_pyfunction!(hoeffding_samples, m)?)?;
    m.add_function(wrap_pyfunction!(iqae_grover_calls, m)?)?;
    m.add_function(wrap_pyfunction!(shadows_samples, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(run_criterion, m)?)?;
    m.add_function(wrap_pyfunction!(formula_descriptor_json, m)?)?;
    m.add("CSV_HEADER", experiment::CSV_HEADER.to_vec())?;
    Ok(())
}
